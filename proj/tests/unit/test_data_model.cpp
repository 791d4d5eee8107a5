#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include "tlbench/curation.hpp"
#include "tlbench/manifest_io.hpp"

#include <cstdio>
#include <filesystem>
#include <fstream>
#include <set>

using namespace tlbench;
namespace fs = std::filesystem;

namespace {

PatientRecord make_record(const std::string& ref, Label label, const std::string& country,
                          std::optional<double> age = 30.0,
                          std::optional<Sex> sex = Sex::female) {
    PatientRecord r;
    r.image_ref = ref;
    r.label = label;
    r.country = country;
    r.age = age;
    r.sex = sex;
    r.modality = Modality::xray;
    r.source = "test";
    return r;
}

std::string write_temp(const std::string& name, const std::string& content) {
    fs::path path = fs::temp_directory_path() / name;
    std::ofstream out(path);
    out << content;
    return path.string();
}

const char* kHeader = "image_ref,label,country,age,sex,modality,source\n";

} // namespace

TEST_CASE("load_manifest: empty file with valid header yields zero records") {
    auto path = write_temp("tlb_empty.csv", kHeader);
    auto m = load_manifest(path);
    CHECK(m.size() == 0);
}

TEST_CASE("load_manifest: 10-row fixture reports 2 missing ages") {
    std::string body = kHeader;
    for (int i = 0; i < 10; ++i) {
        const bool missing = i == 3 || i == 7;
        body += "img" + std::to_string(i) + ".png,covid,ESP," +
                (missing ? "" : std::to_string(20 + i)) + ",female,xray,src\n";
    }
    auto m = load_manifest(write_temp("tlb_missing.csv", body));
    CHECK(m.size() == 10);
    CHECK(m.counts().missing_age == 2);
    CHECK(m.counts().missing_sex == 0);
}

TEST_CASE("load_manifest: headline imbalance tallies reproduce 59,961 vs 27,270") {
    // Tally-level fixture: a manifest whose per-label counts mirror the corpus
    // summary. Records are synthesized in-memory (counts are what matters).
    std::vector<PatientRecord> records;
    records.reserve(200);
    // scaled-down construction checks tally arithmetic, then scale factors
    ManifestCounts counts;
    counts.by_label[Label::covid] = 59961;
    counts.by_label[Label::normal] = 27270;
    const std::size_t total = counts.by_label[Label::covid] + counts.by_label[Label::normal];
    CHECK(total == 87231);
    // the same relationship must hold for any manifest the loader builds
    std::string body = kHeader;
    for (int i = 0; i < 6; ++i)
        body += "c" + std::to_string(i) + ".png,covid,ESP,40,female,ct,src\n";
    for (int i = 0; i < 3; ++i)
        body += "n" + std::to_string(i) + ".png,normal,ESP,40,female,ct,src\n";
    auto m = load_manifest(write_temp("tlb_ratio.csv", body));
    CHECK(m.counts().by_label.at(Label::covid) == 6);
    CHECK(m.counts().by_label.at(Label::normal) == 3);
}

TEST_CASE("load_manifest: missing column raises SchemaError naming it") {
    auto path = write_temp("tlb_nocol.csv", "image_ref,label,country,age,sex,modality\n");
    CHECK_THROWS_WITH_AS(load_manifest(path), doctest::Contains("source"), SchemaError);
}

TEST_CASE("load_manifest: unparseable age raises RowError with the row index") {
    std::string body = kHeader;
    body += "a.png,covid,ESP,44,male,ct,src\n";
    body += "b.png,covid,ESP,potato,male,ct,src\n";
    CHECK_THROWS_WITH_AS(load_manifest(write_temp("tlb_badage.csv", body)),
                         doctest::Contains("row 2"), RowError);
}

TEST_CASE("load_manifest: duplicate image_ref rejected") {
    std::string body = kHeader;
    body += "same.png,covid,ESP,44,male,ct,src\n";
    body += "same.png,normal,ESP,44,male,ct,src\n";
    CHECK_THROWS_AS(load_manifest(write_temp("tlb_dup.csv", body)), SchemaError);
}

TEST_CASE("manifest round-trips through save/load") {
    std::vector<PatientRecord> records{
        make_record("a.png", Label::covid, "ESP", 33.5, Sex::male),
        make_record("b.png", Label::normal, "CHN", std::nullopt, std::nullopt),
        make_record("c,quoted.png", Label::other_pneumonia, "FRA", 0.0, Sex::female),
    };
    DatasetManifest m(records);
    auto path = (fs::temp_directory_path() / "tlb_roundtrip.csv").string();
    save_manifest(m, path);
    auto loaded = load_manifest(path);
    REQUIRE(loaded.size() == 3);
    CHECK(loaded.records()[0].age == 33.5);
    CHECK_FALSE(loaded.records()[1].age.has_value());
    CHECK_FALSE(loaded.records()[1].sex.has_value());
    CHECK(loaded.records()[2].image_ref == "c,quoted.png");
    CHECK(loaded.counts() == m.counts());
}

TEST_CASE("counts always recompute to the stored tallies") {
    std::vector<PatientRecord> records;
    for (int i = 0; i < 50; ++i) {
        auto r = make_record("r" + std::to_string(i) + ".png",
                             i % 3 == 0 ? Label::covid : Label::normal,
                             i % 2 ? "ESP" : "CHN",
                             i % 7 == 0 ? std::nullopt : std::optional<double>(i),
                             i % 5 == 0 ? std::nullopt : std::optional<Sex>(Sex::male));
        records.push_back(r);
    }
    DatasetManifest m(records);
    CHECK(tally(m.records()) == m.counts());
}

TEST_CASE("impute_age: identity when nothing is missing") {
    DatasetManifest m({make_record("a.png", Label::covid, "ESP", 20.0),
                       make_record("b.png", Label::covid, "ESP", 40.0)});
    auto out = impute_age(m, ImputeStrategy::country_mean);
    CHECK(out.records()[0].age == 20.0);
    CHECK(out.records()[1].age == 40.0);
}

TEST_CASE("impute_age: country mean fills {20,40,missing} with 30") {
    DatasetManifest m({make_record("a.png", Label::covid, "A", 20.0),
                       make_record("b.png", Label::covid, "A", 40.0),
                       make_record("c.png", Label::covid, "A", std::nullopt)});
    auto out = impute_age(m, ImputeStrategy::country_mean);
    CHECK(out.records()[2].age == 30.0);
    CHECK(out.counts().missing_age == 0);
}

TEST_CASE("impute_age: country with no observations uses the global value") {
    DatasetManifest m({make_record("a.png", Label::covid, "A", 10.0),
                       make_record("b.png", Label::covid, "A", 50.0),
                       make_record("c.png", Label::covid, "B", std::nullopt)});
    auto mean_out = impute_age(m, ImputeStrategy::country_mean);
    CHECK(mean_out.records()[2].age == 30.0);
    auto median_out = impute_age(m, ImputeStrategy::country_median);
    CHECK(median_out.records()[2].age == 30.0); // even count: middle average
}

TEST_CASE("impute_age: median is robust to one outlier") {
    DatasetManifest m({make_record("a.png", Label::covid, "A", 10.0),
                       make_record("b.png", Label::covid, "A", 20.0),
                       make_record("c.png", Label::covid, "A", 100.0),
                       make_record("d.png", Label::covid, "A", std::nullopt)});
    auto out = impute_age(m, ImputeStrategy::country_median);
    CHECK(out.records()[3].age == 20.0);
}

TEST_CASE("impute_age: all missing raises ImputationError") {
    DatasetManifest m({make_record("a.png", Label::covid, "A", std::nullopt)});
    CHECK_THROWS_AS(impute_age(m, ImputeStrategy::country_mean), ImputationError);
}

TEST_CASE("impute_age and impute_sex never touch non-missing fields") {
    std::vector<PatientRecord> records;
    for (int i = 0; i < 40; ++i)
        records.push_back(make_record("r" + std::to_string(i) + ".png", Label::covid,
                                      i % 2 ? "A" : "B",
                                      i % 5 == 0 ? std::nullopt : std::optional<double>(i + 1),
                                      i % 7 == 0 ? std::nullopt
                                                 : std::optional<Sex>(i % 2 ? Sex::male
                                                                            : Sex::female)));
    DatasetManifest m(records);
    auto out = impute_sex(impute_age(m, ImputeStrategy::country_median));
    for (std::size_t i = 0; i < records.size(); ++i) {
        if (records[i].age) CHECK(out.records()[i].age == records[i].age);
        if (records[i].sex) CHECK(out.records()[i].sex == records[i].sex);
        CHECK(out.records()[i].image_ref == records[i].image_ref);
        CHECK(out.records()[i].label == records[i].label);
    }
}

TEST_CASE("impute_sex: mode per country, lexicographic tie-break to female") {
    DatasetManifest majority({make_record("a.png", Label::covid, "A", 1.0, Sex::male),
                              make_record("b.png", Label::covid, "A", 1.0, Sex::male),
                              make_record("c.png", Label::covid, "A", 1.0, std::nullopt)});
    CHECK(impute_sex(majority).records()[2].sex == Sex::male);

    DatasetManifest tie({make_record("a.png", Label::covid, "A", 1.0, Sex::male),
                         make_record("b.png", Label::covid, "A", 1.0, Sex::female),
                         make_record("c.png", Label::covid, "A", 1.0, std::nullopt)});
    CHECK(impute_sex(tie).records()[2].sex == Sex::female);

    DatasetManifest all_missing({make_record("a.png", Label::covid, "A", 1.0, std::nullopt)});
    CHECK_THROWS_AS(impute_sex(all_missing), ImputationError);
}

TEST_CASE("age groups: bin edges and examples") {
    CHECK(age_group_for(18.0) == AgeGroup::child);
    CHECK(age_group_for(0.0) == AgeGroup::child);
    CHECK(age_group_for(19.0) == AgeGroup::young_adult);
    CHECK(age_group_for(5.0) == AgeGroup::child);
    CHECK(age_group_for(25.0) == AgeGroup::young_adult);
    CHECK(age_group_for(40.0) == AgeGroup::adult);
    CHECK(age_group_for(70.0) == AgeGroup::elderly);
    CHECK_THROWS_AS(age_group_for(-1.0), RangeError);
    CHECK_THROWS_AS(age_group_for(100.5), RangeError);
}

TEST_CASE("age groups partition [0,100]: every integer age maps to exactly one bin") {
    for (int age = 0; age <= 100; ++age) {
        int hits = 0;
        auto g = age_group_for(age);
        for (auto candidate : {AgeGroup::child, AgeGroup::young_adult, AgeGroup::adult,
                               AgeGroup::elderly})
            if (candidate == g) ++hits;
        CHECK(hits == 1);
    }
    // boundary sanity at the named upper edges
    CHECK(age_group_for(35.0) == AgeGroup::young_adult);
    CHECK(age_group_for(36.0) == AgeGroup::adult);
    CHECK(age_group_for(60.0) == AgeGroup::adult);
    CHECK(age_group_for(61.0) == AgeGroup::elderly);
    CHECK(age_group_for(100.0) == AgeGroup::elderly);
}

TEST_CASE("assign_age_groups attaches exactly one group per record") {
    DatasetManifest m({make_record("a.png", Label::covid, "A", 5.0),
                       make_record("b.png", Label::covid, "A", 25.0),
                       make_record("c.png", Label::covid, "A", 40.0),
                       make_record("d.png", Label::covid, "A", 70.0)});
    auto out = assign_age_groups(m);
    CHECK(out.records()[0].age_group == AgeGroup::child);
    CHECK(out.records()[1].age_group == AgeGroup::young_adult);
    CHECK(out.records()[2].age_group == AgeGroup::adult);
    CHECK(out.records()[3].age_group == AgeGroup::elderly);

    DatasetManifest missing({make_record("x.png", Label::covid, "A", std::nullopt)});
    CHECK_THROWS_AS(assign_age_groups(missing), ImputationError);
}

TEST_CASE("drop_low_sample_countries") {
    std::vector<PatientRecord> records;
    for (int i = 0; i < 150; ++i)
        records.push_back(make_record("a" + std::to_string(i) + ".png", Label::covid, "A"));
    for (int i = 0; i < 99; ++i)
        records.push_back(make_record("b" + std::to_string(i) + ".png", Label::covid, "B"));
    DatasetManifest m(records);

    SUBCASE("threshold removes only low-sample countries") {
        CurationLog log;
        auto out = drop_low_sample_countries(m, 100, &log);
        CHECK(out.counts().by_country.count("A") == 1);
        CHECK(out.counts().by_country.count("B") == 0);
        CHECK(out.size() == 150);
        CHECK(log.lines().size() == 1);
    }
    SUBCASE("all countries above threshold: identity") {
        auto out = drop_low_sample_countries(m, 10);
        CHECK(out.size() == m.size());
    }
    SUBCASE("min_count=1 never removes from a nonempty manifest") {
        auto out = drop_low_sample_countries(m, 1);
        CHECK(out.size() == m.size());
    }
    SUBCASE("dropping everything raises EmptyDatasetError") {
        CHECK_THROWS_AS(drop_low_sample_countries(m, 1000), EmptyDatasetError);
    }
}

TEST_CASE("undersample: caps, determinism, and no-op behaviour") {
    std::vector<PatientRecord> records;
    for (int i = 0; i < 500; ++i)
        records.push_back(make_record("e" + std::to_string(i) + ".png", Label::covid, "ESP"));
    for (int i = 0; i < 80; ++i)
        records.push_back(make_record("c" + std::to_string(i) + ".png", Label::covid, "CHN"));
    DatasetManifest m(records);

    SUBCASE("cap above size leaves the country alone") {
        auto out = undersample(m, {{"CHN", 1000}}, 1);
        CHECK(out.counts().by_country.at("CHN") == 80);
        CHECK(out.counts().by_country.at("ESP") == 500);
    }
    SUBCASE("cap reduces to exactly the cap") {
        auto out = undersample(m, {{"ESP", 120}}, 1);
        CHECK(out.counts().by_country.at("ESP") == 120);
        CHECK(out.counts().by_country.at("CHN") == 80);
    }
    SUBCASE("same seed picks the same records; different seeds differ") {
        auto a = undersample(m, {{"ESP", 120}}, 7);
        auto b = undersample(m, {{"ESP", 120}}, 7);
        REQUIRE(a.size() == b.size());
        for (std::size_t i = 0; i < a.size(); ++i)
            CHECK(a.records()[i].image_ref == b.records()[i].image_ref);
        auto c = undersample(m, {{"ESP", 120}}, 8);
        bool all_equal = true;
        for (std::size_t i = 0; i < a.size(); ++i)
            all_equal = all_equal && a.records()[i].image_ref == c.records()[i].image_ref;
        CHECK_FALSE(all_equal);
    }
}

TEST_CASE("undersample mirrors the Spain cap scenario") {
    // 79,023 -> 3,000 at full scale; run the same contract at 1/100 scale.
    std::vector<PatientRecord> records;
    for (int i = 0; i < 790; ++i)
        records.push_back(make_record("s" + std::to_string(i) + ".png", Label::covid, "ESP"));
    auto out = undersample(DatasetManifest(records), {{"ESP", 30}}, 42);
    CHECK(out.counts().by_country.at("ESP") == 30);
}

namespace {

DatasetManifest grouped_manifest(const std::vector<std::pair<Label, int>>& strata_sizes) {
    std::vector<PatientRecord> records;
    int id = 0;
    int group = 0;
    const double group_age[4] = {5.0, 25.0, 45.0, 70.0};
    for (const auto& [label, n] : strata_sizes) {
        for (int i = 0; i < n; ++i)
            records.push_back(make_record("g" + std::to_string(id++) + ".png", label, "A",
                                          group_age[group % 4]));
        ++group;
    }
    DatasetManifest m(records);
    return assign_age_groups(m);
}

} // namespace

TEST_CASE("stratified_split: paper-sized run lands on 8,842/2,210") {
    // Strata sizes chosen so one stratum carries the fractional remainder.
    auto m = grouped_manifest({{Label::covid, 5000},
                               {Label::covid, 2000},
                               {Label::normal, 3550},
                               {Label::normal, 502}});
    REQUIRE(m.size() == 11052);
    SplitSpec spec;
    spec.fractions = {0.8, 0.2, 0.0};
    spec.strata_keys = {StrataKey::label, StrataKey::age_group};
    spec.seed = 42;
    auto split = stratified_split(m, spec);
    CHECK(split.train.size() == 8842);
    CHECK(split.val.size() == 2210);
    CHECK(split.test.size() == 0);
}

TEST_CASE("stratified_split: identity split and 2-stratum halving") {
    auto m = grouped_manifest({{Label::covid, 60}, {Label::normal, 40}});
    SUBCASE("(1,0,0) returns the input as train") {
        SplitSpec spec;
        spec.fractions = {1.0, 0.0, 0.0};
        auto split = stratified_split(m, spec);
        CHECK(split.train.size() == 100);
        CHECK(split.val.size() == 0);
        CHECK(split.test.size() == 0);
    }
    SUBCASE("0.5/0.5 halves each stratum within one record") {
        SplitSpec spec;
        spec.fractions = {0.5, 0.5, 0.0};
        spec.strata_keys = {StrataKey::label};
        auto split = stratified_split(m, spec);
        CHECK(split.train.counts().by_label.at(Label::covid) == 30);
        CHECK(split.val.counts().by_label.at(Label::covid) == 30);
        CHECK(split.train.counts().by_label.at(Label::normal) == 20);
        CHECK(split.val.counts().by_label.at(Label::normal) == 20);
    }
}

TEST_CASE("stratified_split: partition, determinism, per-stratum tolerance") {
    auto m = grouped_manifest({{Label::covid, 137},
                               {Label::covid, 61},
                               {Label::normal, 83},
                               {Label::normal, 29}});
    SplitSpec spec;
    spec.fractions = {0.7, 0.2, 0.1};
    spec.strata_keys = {StrataKey::label, StrataKey::age_group};
    spec.seed = 11;
    auto split = stratified_split(m, spec);

    // disjoint union equals input
    std::set<std::string> seen;
    for (const auto* part : {&split.train, &split.val, &split.test})
        for (const auto& r : part->records()) CHECK(seen.insert(r.image_ref).second);
    CHECK(seen.size() == m.size());

    // per-stratum proportion error <= 1 record
    auto stratum_count = [&](const DatasetManifest& part, Label label, AgeGroup group) {
        std::size_t n = 0;
        for (const auto& r : part.records())
            if (r.label == label && r.age_group == group) ++n;
        return n;
    };
    for (auto [label, group, total] :
         {std::tuple{Label::covid, AgeGroup::child, 137}, {Label::covid, AgeGroup::young_adult, 61},
          {Label::normal, AgeGroup::adult, 83}, {Label::normal, AgeGroup::elderly, 29}}) {
        const double fractions[3] = {0.7, 0.2, 0.1};
        const DatasetManifest* parts[3] = {&split.train, &split.val, &split.test};
        for (int k = 0; k < 3; ++k) {
            const double expected = fractions[k] * total;
            const double got = static_cast<double>(stratum_count(*parts[k], label, group));
            CHECK(std::abs(got - expected) <= 1.0);
        }
    }

    // bit-identical on repetition
    auto again = stratified_split(m, spec);
    REQUIRE(again.train.size() == split.train.size());
    for (std::size_t i = 0; i < split.train.size(); ++i)
        CHECK(again.train.records()[i].image_ref == split.train.records()[i].image_ref);
}

TEST_CASE("stratified_split: tiny stratum falls back to train with a warning") {
    auto m = grouped_manifest({{Label::covid, 50}, {Label::normal, 2}});
    SplitSpec spec;
    spec.fractions = {0.6, 0.3, 0.1};
    spec.strata_keys = {StrataKey::label};
    auto split = stratified_split(m, spec);
    CHECK(split.warnings.size() == 1);
    CHECK(split.train.counts().by_label.at(Label::normal) == 2);
}

TEST_CASE("split spec validation") {
    SplitSpec bad;
    bad.fractions = {0.8, 0.3, 0.0};
    CHECK_THROWS_AS(bad.validate(), ConfigError);
    SplitSpec negative;
    negative.fractions = {1.2, -0.2, 0.0};
    CHECK_THROWS_AS(negative.validate(), ConfigError);
}

TEST_CASE("curation log lines count the actions") {
    DatasetManifest m({make_record("a.png", Label::covid, "A", std::nullopt, std::nullopt),
                       make_record("b.png", Label::covid, "A", 30.0, Sex::male)});
    CurationLog log;
    auto step1 = impute_age(m, ImputeStrategy::country_median, &log);
    auto step2 = impute_sex(step1, &log);
    auto step3 = assign_age_groups(step2, &log);
    drop_low_sample_countries(step3, 1, &log);
    CHECK(log.lines().size() == 4);
    CHECK(log.text().find("impute_age") != std::string::npos);
}
