#include "tlbench/records.hpp"

#include <fstream>
#include <unordered_set>

namespace tlbench {

std::string to_string(Label v) {
    switch (v) {
    case Label::covid: return "covid";
    case Label::normal: return "normal";
    case Label::other_pneumonia: return "other_pneumonia";
    }
    return "?";
}

std::string to_string(Sex v) { return v == Sex::male ? "male" : "female"; }

std::string to_string(Modality v) { return v == Modality::ct ? "ct" : "xray"; }

std::string to_string(AgeGroup v) {
    switch (v) {
    case AgeGroup::child: return "child";
    case AgeGroup::young_adult: return "young_adult";
    case AgeGroup::adult: return "adult";
    case AgeGroup::elderly: return "elderly";
    }
    return "?";
}

Label label_from_string(const std::string& s) {
    if (s == "covid") return Label::covid;
    if (s == "normal") return Label::normal;
    if (s == "other_pneumonia") return Label::other_pneumonia;
    throw RangeError("unknown label: '" + s + "'");
}

Sex sex_from_string(const std::string& s) {
    if (s == "male") return Sex::male;
    if (s == "female") return Sex::female;
    throw RangeError("unknown sex: '" + s + "'");
}

Modality modality_from_string(const std::string& s) {
    if (s == "ct") return Modality::ct;
    if (s == "xray") return Modality::xray;
    throw RangeError("unknown modality: '" + s + "'");
}

AgeGroup age_group_from_string(const std::string& s) {
    if (s == "child") return AgeGroup::child;
    if (s == "young_adult") return AgeGroup::young_adult;
    if (s == "adult") return AgeGroup::adult;
    if (s == "elderly") return AgeGroup::elderly;
    throw RangeError("unknown age group: '" + s + "'");
}

AgeGroup age_group_for(double age) {
    if (!(age >= 0.0 && age <= 100.0))
        throw RangeError("age " + std::to_string(age) + " outside [0,100]");
    if (age <= 18.0) return AgeGroup::child;
    if (age <= 35.0) return AgeGroup::young_adult;
    if (age <= 60.0) return AgeGroup::adult;
    return AgeGroup::elderly;
}

ManifestCounts tally(const std::vector<PatientRecord>& records) {
    ManifestCounts c;
    c.total = records.size();
    for (const auto& r : records) {
        ++c.by_label[r.label];
        ++c.by_country[r.country];
        if (r.age_group) ++c.by_age_group[*r.age_group];
        if (!r.age) ++c.missing_age;
        if (!r.sex) ++c.missing_sex;
    }
    return c;
}

DatasetManifest::DatasetManifest(std::vector<PatientRecord> records)
    : records_(std::move(records)) {
    std::unordered_set<std::string> seen;
    seen.reserve(records_.size());
    for (const auto& r : records_) {
        if (!seen.insert(r.image_ref).second)
            throw SchemaError("duplicate image_ref: " + r.image_ref);
        if (r.age && !(*r.age >= 0.0 && *r.age <= 100.0))
            throw RangeError("age " + std::to_string(*r.age) + " outside [0,100] for " +
                             r.image_ref);
    }
    counts_ = tally(records_);
}

std::string CurationLog::text() const {
    std::string out;
    for (const auto& line : lines_) {
        out += line;
        out.push_back('\n');
    }
    return out;
}

void CurationLog::write(const std::string& path) const {
    std::ofstream out(path, std::ios::binary);
    if (!out) throw IoError("cannot write curation log: " + path);
    out << text();
}

} // namespace tlbench
