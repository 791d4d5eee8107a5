#include "tlbench/manifest_io.hpp"

#include "tlbench/csv.hpp"

#include <fmt/format.h>

#include <algorithm>
#include <charconv>

namespace tlbench {

const char* const kManifestColumns[7] = {"image_ref", "label",    "country", "age",
                                         "sex",       "modality", "source"};

namespace {

double parse_age(const std::string& text, std::size_t row) {
    double value = 0.0;
    const char* begin = text.data();
    const char* end = begin + text.size();
    auto [ptr, ec] = std::from_chars(begin, end, value);
    if (ec != std::errc{} || ptr != end)
        throw RowError(row, "unparseable age: '" + text + "'");
    if (!(value >= 0.0 && value <= 100.0))
        throw RowError(row, fmt::format("age {} outside [0,100]", text));
    return value;
}

} // namespace

DatasetManifest load_manifest(const std::string& path) {
    csv::Table table = csv::read_file(path);

    std::map<std::string, std::size_t> col;
    for (std::size_t i = 0; i < table.header.size(); ++i) col[table.header[i]] = i;
    for (const char* name : kManifestColumns) {
        if (!col.count(name))
            throw SchemaError(fmt::format("manifest {} is missing column '{}'", path, name));
    }

    std::vector<PatientRecord> records;
    records.reserve(table.rows.size());
    for (std::size_t i = 0; i < table.rows.size(); ++i) {
        const auto& row = table.rows[i];
        const std::size_t row_no = i + 1; // 1-based data row
        if (row.size() < table.header.size())
            throw RowError(row_no, fmt::format("expected {} fields, got {}", table.header.size(),
                                               row.size()));
        auto field = [&](const char* name) -> const std::string& { return row[col.at(name)]; };

        PatientRecord r;
        r.image_ref = field("image_ref");
        if (r.image_ref.empty()) throw RowError(row_no, "empty image_ref");
        try {
            r.label = label_from_string(field("label"));
            r.modality = modality_from_string(field("modality"));
            if (!field("sex").empty()) r.sex = sex_from_string(field("sex"));
        } catch (const RangeError& e) {
            throw RowError(row_no, e.what());
        }
        if (!field("age").empty()) r.age = parse_age(field("age"), row_no);
        r.country = field("country");
        r.source = field("source");
        records.push_back(std::move(r));
    }
    return DatasetManifest(std::move(records));
}

void save_manifest(const DatasetManifest& manifest, const std::string& path) {
    csv::Table table;
    table.header.assign(std::begin(kManifestColumns), std::end(kManifestColumns));
    table.rows.reserve(manifest.size());
    for (const auto& r : manifest.records()) {
        csv::Row row;
        row.push_back(r.image_ref);
        row.push_back(to_string(r.label));
        row.push_back(r.country);
        row.push_back(r.age ? fmt::format("{}", *r.age) : "");
        row.push_back(r.sex ? to_string(*r.sex) : "");
        row.push_back(to_string(r.modality));
        row.push_back(r.source);
        table.rows.push_back(std::move(row));
    }
    csv::write_file(path, table);
}

} // namespace tlbench
