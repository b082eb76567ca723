#include "test_support.hpp"

using namespace funaft;
using testutil::make_subject;
using testutil::TempDir;
using testutil::write_file;

TEST(LoadDataset, TwoSubjectsThreeRowsEach) {
    TempDir dir("load2");
    write_file(dir.file("s.csv"), "id,time,status,age\nA,5.5,1,30\nB,7,0,41\n");
    // rows deliberately out of order
    write_file(dir.file("f.csv"), "id,s,x\nA,0.5,2\nB,0,1\nA,0,1\nB,1,3\nA,1,4\nB,0.5,2\n");
    const auto d = load_dataset(dir.file("s.csv"), dir.file("f.csv"));
    ASSERT_EQ(d.size(), 2u);
    EXPECT_EQ(d.scalar_names, std::vector<std::string>{"age"});
    EXPECT_EQ(d.subjects[0].id, "A");
    EXPECT_EQ(d.subjects[0].grid, (std::vector<double>{0, 0.5, 1}));
    EXPECT_EQ(d.subjects[0].values, (std::vector<double>{1, 2, 4}));
    EXPECT_EQ(d.subjects[1].num_points(), 3u);
    EXPECT_FALSE(d.subjects[1].event);
    EXPECT_EQ(d.subjects[1].scalars[0], 41.0);
    EXPECT_EQ(d.domain.lo, 0.0);
    EXPECT_EQ(d.domain.hi, 1.0);
}

TEST(LoadDataset, ZeroTimeIsValidationErrorWithLine) {
    TempDir dir("zero");
    write_file(dir.file("s.csv"), "id,time,status\nA,1,1\nB,0,1\n");
    write_file(dir.file("f.csv"), "id,s,x\nA,0,1\nA,1,1\nB,0,1\nB,1,1\n");
    try {
        load_dataset(dir.file("s.csv"), dir.file("f.csv"));
        FAIL() << "expected ValidationError";
    } catch (const ValidationError& e) {
        EXPECT_NE(std::string(e.what()).find(":3"), std::string::npos) << e.what();
    }
}

TEST(LoadDataset, UnknownFunctionalIdNamesTheId) {
    TempDir dir("unk");
    write_file(dir.file("s.csv"), "id,time,status\nA,1,1\n");
    write_file(dir.file("f.csv"), "id,s,x\nA,0,1\nA,1,1\nZZ9,0,1\n");
    try {
        load_dataset(dir.file("s.csv"), dir.file("f.csv"));
        FAIL() << "expected LoadError";
    } catch (const LoadError& e) {
        EXPECT_NE(std::string(e.what()).find("ZZ9"), std::string::npos);
    }
}

TEST(LoadDataset, DuplicateGridPointIsValidationError) {
    TempDir dir("dup");
    write_file(dir.file("s.csv"), "id,time,status\nA,1,1\n");
    write_file(dir.file("f.csv"), "id,s,x\nA,0,1\nA,0.5,1\nA,0.5,2\n");
    EXPECT_THROW(load_dataset(dir.file("s.csv"), dir.file("f.csv")), ValidationError);
}

TEST(LoadDataset, AllCensoredRejectedUnlessAllowed) {
    TempDir dir("cens");
    write_file(dir.file("s.csv"), "id,time,status\nA,1,0\n");
    write_file(dir.file("f.csv"), "id,s,x\nA,0,1\nA,1,1\n");
    EXPECT_THROW(load_dataset(dir.file("s.csv"), dir.file("f.csv")), ValidationError);
    EXPECT_EQ(load_dataset(dir.file("s.csv"), dir.file("f.csv"), false).size(), 1u);
}

TEST(LoadDataset, SubjectWithoutCurveIsLoadError) {
    TempDir dir("nocurve");
    write_file(dir.file("s.csv"), "id,time,status\nA,1,1\nB,2,1\n");
    write_file(dir.file("f.csv"), "id,s,x\nA,0,1\nA,1,1\n");
    EXPECT_THROW(load_dataset(dir.file("s.csv"), dir.file("f.csv")), LoadError);
}

TEST(LoadDataset, BadNumberReportsLocation) {
    TempDir dir("badnum");
    write_file(dir.file("s.csv"), "id,time,status\nA,1,1\n");
    write_file(dir.file("f.csv"), "id,s,x\nA,0,1\nA,1,abc\n");
    try {
        load_dataset(dir.file("s.csv"), dir.file("f.csv"));
        FAIL();
    } catch (const ValidationError& e) {
        EXPECT_NE(std::string(e.what()).find("f.csv:3"), std::string::npos) << e.what();
    }
}

TEST(LoadDataset, PupilScaleSharedGrid) {
    // 127 subjects, 120 samples at 30 Hz
    std::vector<Subject> subs;
    std::vector<double> grid;
    for (int j = 0; j < 120; ++j) grid.push_back(j / 30.0);
    for (int i = 0; i < 127; ++i) {
        std::vector<double> v(120);
        for (int j = 0; j < 120; ++j) v[static_cast<std::size_t>(j)] = std::sin(0.1 * i + grid[static_cast<std::size_t>(j)]);
        subs.push_back(make_subject("P" + std::to_string(i), 10.0 + i, i % 3 != 0, grid, v));
    }
    const auto data = make_dataset(subs, {});
    TempDir dir("pupil");
    write_dataset(data, dir.file("s.csv"), dir.file("f.csv"));
    const auto back = load_dataset(dir.file("s.csv"), dir.file("f.csv"));
    EXPECT_EQ(back.size(), 127u);
    EXPECT_TRUE(shares_grid(back));
    EXPECT_EQ(back.subjects.front().num_points(), 120u);
}

TEST(LoadDataset, RoundTripIsExact) {
    const auto sim = simulate_dgp(SimulationConfig::defaults(Dgp::lfaft_lognormal, 20, 15, 4));
    TempDir dir("rt");
    write_dataset(sim.data, dir.file("s.csv"), dir.file("f.csv"));
    const auto back = load_dataset(dir.file("s.csv"), dir.file("f.csv"));
    ASSERT_EQ(back.size(), sim.data.size());
    for (std::size_t i = 0; i < back.size(); ++i) {
        EXPECT_EQ(back.subjects[i].id, sim.data.subjects[i].id);
        EXPECT_EQ(back.subjects[i].time, sim.data.subjects[i].time);
        EXPECT_EQ(back.subjects[i].event, sim.data.subjects[i].event);
        EXPECT_EQ(back.subjects[i].grid, sim.data.subjects[i].grid);
        EXPECT_EQ(back.subjects[i].values, sim.data.subjects[i].values);
    }
    // writing again reproduces the same bytes
    write_dataset(back, dir.file("s2.csv"), dir.file("f2.csv"));
    EXPECT_EQ(testutil::read_file(dir.file("s.csv")), testutil::read_file(dir.file("s2.csv")));
    EXPECT_EQ(testutil::read_file(dir.file("f.csv")), testutil::read_file(dir.file("f2.csv")));
}

TEST(MakeDataset, RejectsBrokenSubjects) {
    EXPECT_THROW(make_dataset({make_subject("a", 0.0, true, {0, 1}, {1, 1})}, {}), ValidationError);
    EXPECT_THROW(make_dataset({make_subject("a", 1.0, true, {0, 0}, {1, 1})}, {}), ValidationError);
    EXPECT_THROW(make_dataset({make_subject("a", 1.0, true, {0}, {1})}, {}), ValidationError);
    EXPECT_THROW(make_dataset({make_subject("a", 1.0, true, {0, 1}, {1, NAN})}, {}), ValidationError);
    EXPECT_THROW(make_dataset({make_subject("a", 1.0, true, {0, 1}, {1, 1}, {2.0})}, {}), ValidationError);
}

TEST(NormalizeDomain, AffineMapOntoUnitInterval) {
    const auto d = make_dataset({make_subject("a", 1, true, {0, 2, 4}, {1, 2, 3})}, {});
    const auto n = normalize_domain(d);
    EXPECT_EQ(n.subjects[0].grid, (std::vector<double>{0, 0.5, 1}));
    EXPECT_EQ(n.subjects[0].values, d.subjects[0].values);
    EXPECT_EQ(n.domain_map.offset, 0.0);
    EXPECT_EQ(n.domain_map.scale, 4.0);
}

TEST(NormalizeDomain, IdentityOnUnitDomain) {
    const auto d = make_dataset({make_subject("a", 1, true, {0, 0.3, 1}, {1, 2, 3}),
                                 make_subject("b", 2, false, {0.1, 0.5}, {0, 0})},
                                {});
    const auto n = normalize_domain(d);
    EXPECT_EQ(n.subjects[0].grid, d.subjects[0].grid);
    EXPECT_EQ(n.subjects[1].grid, d.subjects[1].grid);
    EXPECT_TRUE(n.domain_map.is_identity());
}

TEST(NormalizeDomain, PupilSecondsEndpoints) {
    std::vector<double> g;
    for (int s = 27; s <= 56; ++s) g.push_back(s);
    const auto d = make_dataset({make_subject("a", 1, true, g, std::vector<double>(g.size(), 1.0))}, {});
    const auto n = normalize_domain(d);
    EXPECT_EQ(n.subjects[0].grid.front(), 0.0);
    EXPECT_EQ(n.subjects[0].grid.back(), 1.0);
    EXPECT_NEAR(n.subjects[0].grid[1], 1.0 / 29.0, 1e-15);
    EXPECT_NEAR(n.domain_map.to_original(1.0), 56.0, 1e-12);
}

TEST(NormalizeDomain, IsIdempotentAndComposesMaps) {
    const auto d = make_dataset({make_subject("a", 1, true, {-3, -1, 5}, {1, 2, 3}),
                                 make_subject("b", 1, true, {-2, 0, 1}, {1, 2, 3})},
                                {});
    const auto once = normalize_domain(d);
    const auto twice = normalize_domain(once);
    for (std::size_t i = 0; i < 2; ++i) EXPECT_EQ(once.subjects[i].grid, twice.subjects[i].grid);
    EXPECT_EQ(once.domain_map.offset, twice.domain_map.offset);
    EXPECT_EQ(once.domain_map.scale, twice.domain_map.scale);
    EXPECT_NEAR(twice.domain_map.to_original(0.25), -1.0, 1e-12);
}

TEST(NormalizeDomain, ZeroLengthDomainIsError) {
    SurvivalDataset d;
    d.subjects.push_back(make_subject("a", 1, true, {0, 1}, {1, 1}));
    d.domain = {2.0, 2.0};
    EXPECT_THROW(normalize_domain(d), ValidationError);
}

TEST(MeanCurve, SharedAndIrregularGrids) {
    const auto shared = make_dataset({make_subject("a", 1, true, {0, 0.5, 1}, {1, 2, 3}),
                                      make_subject("b", 1, true, {0, 0.5, 1}, {3, 2, 1})},
                                     {});
    const auto m = pointwise_mean(shared);
    EXPECT_EQ(m.values, (std::vector<double>{2, 2, 2}));
    const auto centered = subtract_mean(shared, m);
    EXPECT_EQ(centered.subjects[0].values, (std::vector<double>{-1, 0, 1}));

    const auto irregular = make_dataset({make_subject("a", 1, true, {0, 1}, {0, 2}),
                                         make_subject("b", 1, true, {0, 0.25, 1}, {2, 2, 2})},
                                        {});
    const auto mi = pointwise_mean(irregular, 5);
    ASSERT_EQ(mi.grid.size(), 5u);
    EXPECT_NEAR(mi(0.5), 1.5, 1e-12);
    EXPECT_NEAR(mi(0.0), 1.0, 1e-12);
}
