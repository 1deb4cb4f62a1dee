#include "swfsec/features.hpp"

#include "swfsec/rng.hpp"
#include "swfsec/swfgen.hpp"

#include "abc_asm.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>

#include <doctest.h>

using namespace swfsec;
using features::RawFeatureVector;

namespace {

swf::SwfDocument doc_with(const std::vector<std::uint32_t>& codes) {
    swf::SwfDocument d;
    for (auto c : codes)
        d.tags.push_back({c, 0, {}, 0, false});
    return d;
}

RawFeatureVector raw(const std::map<std::string, std::int64_t>& counts) {
    RawFeatureVector v;
    for (const auto& [k, n] : counts)
        v.add(k, n);
    return v;
}

// Presence pattern per sample; malicious rows first.
struct Toy {
    std::vector<RawFeatureVector> samples;
    std::vector<int> labels;
};

Toy six_feature_set() {
    Toy t;
    const std::vector<std::map<std::string, std::int64_t>> mal = {
        {{"method:f1", 1}, {"method:f2", 2}, {"method:f3", 1}, {"method:f4", 1}, {"method:f6", 1}},
        {{"method:f1", 1}, {"method:f2", 2}, {"method:f4", 1}},
        {{"method:f1", 1}, {"method:f2", 2}},
        {{"method:f1", 1}},
    };
    const std::vector<std::map<std::string, std::int64_t>> ben = {
        {{"method:f3", 1}, {"method:f4", 1}, {"method:f5", 1}},
        {{"method:f3", 1}, {"method:f4", 1}, {"method:f5", 1}},
        {{"method:f3", 1}},
        {{"method:f3", 1}},
    };
    for (const auto& m : mal) {
        t.samples.push_back(raw(m));
        t.labels.push_back(1);
    }
    for (const auto& b : ben) {
        t.samples.push_back(raw(b));
        t.labels.push_back(-1);
    }
    return t;
}

} // namespace

TEST_SUITE("features") {

TEST_CASE("structural counts from tag codes") {
    const auto table = features::TagTable::defaults();
    auto s = features::structural_counts(doc_with({1, 1, 2, 0}), table);
    CHECK(s[features::Frames] == 2);
    CHECK(s[features::Shapes] == 1);
    CHECK(std::accumulate(s.begin(), s.end(), std::int64_t{0}) == 3);
    s = features::structural_counts(doc_with({999}), table);
    CHECK(s[features::Unknown] == 1);
    s = features::structural_counts(doc_with({9, 69, 1005}), table);
    CHECK(s[features::Fonts] == 1);
    CHECK(s[features::Unknown] == 0);
    auto d = doc_with({});
    d.parse_errors = 1;
    d.decompress_failed = true;
    CHECK(features::structural_counts(d, table, 2)[features::Errors] == 4);
}

TEST_CASE("default tag table mapping") {
    const auto table = features::TagTable::defaults();
    const std::map<std::uint32_t, features::Structural> expected = {
        {1, features::Frames},     {2, features::Shapes},      {22, features::Shapes},  {32, features::Shapes},
        {83, features::Shapes},    {14, features::Sounds},     {18, features::Sounds},  {45, features::Sounds},
        {19, features::Sounds},    {87, features::BinaryData}, {82, features::Scripts}, {72, features::Scripts},
        {59, features::Scripts},   {12, features::Scripts},    {10, features::Fonts},   {48, features::Fonts},
        {75, features::Fonts},     {91, features::Fonts},      {13, features::Fonts},   {62, features::Fonts},
        {88, features::Fonts},     {1005, features::Fonts},    {39, features::Sprites}, {46, features::MorphShapes},
        {84, features::MorphShapes}, {11, features::Texts},    {33, features::Texts},   {37, features::Texts},
        {6, features::Images},     {8, features::Images},      {20, features::Images},  {21, features::Images},
        {35, features::Images},    {36, features::Images},     {90, features::Images},  {60, features::Videos},
        {61, features::Videos},    {7, features::Buttons},     {34, features::Buttons},
    };
    for (const auto& [code, f] : expected)
        CHECK(table.lookup(code) == static_cast<int>(f));
    CHECK(table.lookup(0) == features::TagTable::kKnown);
    CHECK(table.lookup(999) == features::TagTable::kUnknown);
    CHECK(table.lookup(table.unused_code()) == features::TagTable::kUnknown);
    const auto file = features::TagTable::load(std::string(SWFSEC_DATA_DIR) + "/tag_table.txt");
    for (std::uint32_t c = 0; c < 1024; ++c)
        CHECK(file.lookup(c) == table.lookup(c));
}

TEST_CASE("tag table errors") {
    CHECK_THROWS_AS(features::TagTable::parse("Errors: 5\n"), Error);
    CHECK_THROWS_AS(features::TagTable::parse("Frames 1\n"), Error);
    CHECK_THROWS_AS(features::TagTable::parse("Frames: x\n"), Error);
    CHECK_THROWS_AS(features::TagTable::parse("Bogus: 1\n"), Error);
}

TEST_CASE("API counts from the listings") {
    const auto wl = abc::ApiWhitelist::load_default();
    auto m = features::api_counts(abc::scan_abc(test::listing_one_abc(), wl));
    CHECK(m == std::map<std::string, std::int64_t>{{"class:flash.external.ExternalInterface", 2},
                                                   {"method:addCallback", 1}});
    m = features::api_counts(abc::scan_abc(test::listing_two_abc(), wl));
    CHECK(m == std::map<std::string, std::int64_t>{{"class:flash.utils.ByteArray", 1},
                                                   {"class:flash.utils.Endian", 1},
                                                   {"method:readUnsignedByte", 1}});
    CHECK(features::api_counts({}).empty());
}

TEST_CASE("extract folds a DoABC into Scripts and API counts") {
    const auto table = features::TagTable::defaults();
    const auto wl = abc::ApiWhitelist::load_default();
    Bytes body = swf::minimal_frame_header(1);
    swf::append_tag(body, 1, {});
    swf::append_tag(body, abc::kTagDoAbc, swfgen::doabc_body(test::listing_two_abc()));
    swf::append_tag(body, 0, {});
    const auto v = features::extract(swf::assemble(swf::Compression::Zlib, 10, body), table, wl);
    CHECK(v.value("Frames") == 1);
    CHECK(v.value("Scripts") == 1);
    CHECK(v.value("class:flash.utils.Endian") == 1);
    CHECK(v.value("Errors") == 0);
}

TEST_CASE("selection score ordering") {
    const Toy t = six_feature_set();
    const auto ranked = features::FeatureSpace::rank(t.samples, t.labels);
    REQUIRE(ranked.size() >= 6);
    CHECK(ranked[0].name == "method:f1");
    CHECK(ranked[0].score == doctest::Approx(1.0));
    CHECK(ranked[1].name == "method:f2"); // ties f3 at 0.75, larger total
    CHECK(ranked[2].name == "method:f3");
    CHECK(ranked[3].name == "method:f5");
    CHECK(ranked[4].name == "method:f6");
    const auto space = features::FeatureSpace::fit(t.samples, t.labels, 3);
    CHECK(space.selected() == std::vector<std::string>{"method:f1", "method:f2", "method:f3"});
    // f4 is present in half of each class
    auto f4 = std::find_if(ranked.begin(), ranked.end(), [](const auto& s) { return s.name == "method:f4"; });
    CHECK(f4->score == doctest::Approx(0.0));
}

TEST_CASE("selection is stable under permutation") {
    Toy t = six_feature_set();
    const auto a = features::FeatureSpace::fit(t.samples, t.labels, 5).selected();
    std::reverse(t.samples.begin(), t.samples.end());
    std::reverse(t.labels.begin(), t.labels.end());
    CHECK(features::FeatureSpace::fit(t.samples, t.labels, 5).selected() == a);
}

TEST_CASE("idf uses the smoothed formula on capped counts") {
    const Toy t = six_feature_set();
    const auto space = features::FeatureSpace::fit(t.samples, t.labels, 3);
    // df: f1 4, f2 3, f3 5, N = 8
    CHECK(space.idf()[0] == doctest::Approx(std::log(9.0 / 5.0) + 1.0));
    CHECK(space.idf()[1] == doctest::Approx(std::log(9.0 / 4.0) + 1.0));
    CHECK(space.idf()[2] == doctest::Approx(std::log(9.0 / 6.0) + 1.0));
    for (double w : space.idf())
        CHECK(w >= 1.0);
}

TEST_CASE("fit needs both classes") {
    const Toy t = six_feature_set();
    std::vector<int> all_mal(t.labels.size(), 1);
    try {
        features::FeatureSpace::fit(t.samples, all_mal);
        FAIL("expected DegenerateTraining");
    } catch (const Error& e) {
        CHECK(e.code() == ErrorCode::DegenerateTraining);
    }
}

TEST_CASE("transform caps and normalizes") {
    const auto space = features::FeatureSpace::from_parts({"Frames", "method:x"}, 10, {1.0, 1.0});
    CHECK(space.transform(RawFeatureVector{}) == std::vector<double>{0.0, 0.0});
    CHECK(space.capped(raw({{"Frames", 25}})) == std::vector<double>{10.0, 0.0});
    const auto z = space.transform(raw({{"Frames", 1}, {"method:x", 2}}));
    CHECK(z[0] == doctest::Approx(1.0 / std::sqrt(5.0)));
    CHECK(z[1] == doctest::Approx(2.0 / std::sqrt(5.0)));
    CHECK(space.transform(raw({{"Frames", 3}}), false) == std::vector<double>{3.0, 0.0});
    CHECK_THROWS_AS(features::FeatureSpace().transform(RawFeatureVector{}), Error);
}

TEST_CASE("transform properties") {
    Rng rng(3);
    std::vector<std::string> names;
    std::vector<double> idf;
    for (int i = 0; i < 8; ++i) {
        names.push_back("method:m" + std::to_string(i));
        idf.push_back(1.0 + rng.uniform() * 3.0);
    }
    const auto space = features::FeatureSpace::from_parts(names, 10, idf);
    for (int trial = 0; trial < 200; ++trial) {
        RawFeatureVector v;
        for (const auto& n : names)
            if (rng.bernoulli(0.6))
                v.add(n, static_cast<std::int64_t>(rng.index(30)));
        const auto c = space.capped(v);
        RawFeatureVector again;
        for (std::size_t j = 0; j < names.size(); ++j)
            again.add(names[j], static_cast<std::int64_t>(c[j]));
        CHECK(space.capped(again) == c);
        const auto z = space.normalize(c);
        double norm = 0.0;
        for (double x : z)
            norm += x * x;
        norm = std::sqrt(norm);
        CHECK((norm == 0.0 || std::abs(norm - 1.0) < 1e-9));
        const std::size_t j = rng.index(names.size());
        RawFeatureVector more = v;
        more.add(names[j], 1);
        CHECK(space.capped(more)[j] >= c[j]);
    }
}

TEST_CASE("jacobian of the normalization") {
    auto one = features::FeatureSpace::from_parts({"Frames"}, 10, {2.0});
    const std::vector<double> c1{3.0};
    CHECK(one.jacobian(c1)(0, 0) == doctest::Approx(0.0));

    const auto unit = features::FeatureSpace::from_parts({"Frames", "Shapes"}, 10, {1.0, 1.0});
    const std::vector<double> c2{1.0, 1.0};
    const Matrix j2 = unit.jacobian(c2);
    const double expect = 1.0 / (2.0 * std::sqrt(2.0));
    CHECK(j2(0, 0) == doctest::Approx(expect));
    CHECK(j2(1, 1) == doctest::Approx(expect));
    CHECK(j2(0, 1) == doctest::Approx(-expect));
    CHECK(j2(0, 1) == j2(1, 0));

    const std::vector<double> zero{0.0, 0.0};
    CHECK_THROWS_AS(unit.jacobian(zero), Error);

    Rng rng(9);
    const std::vector<std::string> names{"Frames", "Shapes", "Sounds", "Fonts", "Texts"};
    for (int trial = 0; trial < 20; ++trial) {
        std::vector<double> idf, c;
        for (std::size_t i = 0; i < names.size(); ++i) {
            idf.push_back(1.0 + 2.0 * rng.uniform());
            c.push_back(0.5 + 8.0 * rng.uniform());
        }
        const auto space = features::FeatureSpace::from_parts(names, 10, idf);
        const Matrix jac = space.jacobian(c);
        const double h = 1e-5;
        for (std::size_t col = 0; col < names.size(); ++col) {
            auto up = c, down = c;
            up[col] += h;
            down[col] -= h;
            const auto zu = space.normalize(up), zd = space.normalize(down);
            for (std::size_t row = 0; row < names.size(); ++row) {
                const double fd = (zu[row] - zd[row]) / (2 * h);
                CHECK(std::abs(jac(row, col) - fd) <= 1e-6 * std::max(1.0, std::abs(fd)));
            }
        }
    }
}

TEST_CASE("feature space JSON round-trip") {
    const Toy t = six_feature_set();
    const auto space = features::FeatureSpace::fit(t.samples, t.labels, 4);
    const auto back = features::FeatureSpace::from_json(space.to_json());
    CHECK(back.selected() == space.selected());
    CHECK(back.idf() == space.idf());
    CHECK(back.v_max() == space.v_max());
}

TEST_CASE("feature CSV layout") {
    Matrix m;
    m.append_row(std::vector<double>{1.0, 0.5});
    const auto csv = features::feature_csv({"Frames", "method:x"}, {"a.swf"}, {1}, m);
    CHECK(csv.rfind("file,label,Frames,method:x\n", 0) == 0);
    CHECK(csv.find("a.swf,1,1,0.5") != std::string::npos);
}

} // TEST_SUITE
