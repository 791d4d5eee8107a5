#pragma once

#include "tlbench/errors.hpp"

#include <cstdint>
#include <map>
#include <optional>
#include <string>
#include <vector>

namespace tlbench {

enum class Label { covid, normal, other_pneumonia };
enum class Sex { male, female };
enum class Modality { ct, xray };

/// Age bins: child 0-18, young_adult 19-35, adult 36-60, elderly 61+.
/// Upper edges are inclusive (18 -> child, 19 -> young_adult); fractional
/// ages fall into the bin whose named integer range contains their floor side,
/// i.e. child = [0,18], young_adult = (18,35], adult = (35,60], elderly = (60,100].
enum class AgeGroup { child, young_adult, adult, elderly };

std::string to_string(Label v);
std::string to_string(Sex v);
std::string to_string(Modality v);
std::string to_string(AgeGroup v);

Label label_from_string(const std::string& s);
Sex sex_from_string(const std::string& s);
Modality modality_from_string(const std::string& s);
AgeGroup age_group_from_string(const std::string& s);

/// Bin lookup. Throws RangeError outside [0,100].
AgeGroup age_group_for(double age);

/// Binary target encoding: covid is the positive class.
inline int binary_target(Label label) { return label == Label::covid ? 1 : 0; }

/// One image's metadata row.
struct PatientRecord {
    std::string image_ref;
    Label label = Label::normal;
    std::string country;
    std::optional<double> age;          // years in [0,100] when present
    std::optional<Sex> sex;
    Modality modality = Modality::xray;
    std::string source;
    std::optional<AgeGroup> age_group;  // derived by assign_age_groups
};

struct ManifestCounts {
    std::size_t total = 0;
    std::map<Label, std::size_t> by_label;
    std::map<std::string, std::size_t> by_country;
    std::map<AgeGroup, std::size_t> by_age_group; // records with a group assigned
    std::size_t missing_age = 0;
    std::size_t missing_sex = 0;

    bool operator==(const ManifestCounts&) const = default;
};

ManifestCounts tally(const std::vector<PatientRecord>& records);

/// Validated, immutable collection of records plus summary tallies.
/// Construction rejects duplicate image_refs and recomputes counts, so the
/// stored tallies always match the records.
class DatasetManifest {
  public:
    DatasetManifest() = default;
    explicit DatasetManifest(std::vector<PatientRecord> records);

    const std::vector<PatientRecord>& records() const { return records_; }
    const ManifestCounts& counts() const { return counts_; }
    std::size_t size() const { return records_.size(); }
    bool empty() const { return records_.empty(); }

  private:
    std::vector<PatientRecord> records_;
    ManifestCounts counts_;
};

/// Curation audit trail: one line per action (operation, parameters, rows affected).
class CurationLog {
  public:
    void add(const std::string& line) { lines_.push_back(line); }
    const std::vector<std::string>& lines() const { return lines_; }
    std::string text() const;
    void write(const std::string& path) const;

  private:
    std::vector<std::string> lines_;
};

} // namespace tlbench
