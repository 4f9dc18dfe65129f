#include <doctest.h>

#include <cmath>

#include "meandim/entropy.hpp"

using namespace meandim;

namespace {

const long double kPhi = (1.0L + std::sqrt(5.0L)) / 2.0L;

SubshiftSpec mcmullen() { return cellwise_shift(Alphabet::paired(4, 2), {0, 2, 1}); }

SubshiftSpec vertical_golden_digits() {
    SubshiftSpec s = full_shift(Alphabet::plain(2), 2);
    add_forbidden_pairs(s, 1, {{1, 1}});
    return s;
}

}  // namespace

TEST_CASE("entropy series of simple shifts") {
    const auto full = entropy_series(full_shift(Alphabet::plain(2)), FolnerFamily::boxes, 10);
    for (const auto& r : full.rows) CHECK(r.per_site == doctest::Approx(std::log(2.0)).epsilon(1e-15));
    for (std::size_t i = 1; i < full.rows.size(); ++i) CHECK(full.rows[i].window_size > full.rows[i - 1].window_size);

    const auto gm = entropy_series(hard_square(1), FolnerFamily::boxes, 16);
    CHECK(gm.rows.back().count == 2584);
    CHECK(std::fabs(gm.rows.back().per_site - std::log(2584.0L) / 16) < 1e-15L);
    for (const auto& r : gm.rows) CHECK(r.per_site == r.log_count / static_cast<long double>(r.window_size));

    const auto empty = entropy_series(cellwise_shift(Alphabet::plain(2), {}), FolnerFamily::boxes, 3);
    CHECK(empty.empty_system);
    CHECK(std::isinf(empty.rows[0].log_count));
    CHECK(std::isinf(entropy_estimate(empty).value));
}

TEST_CASE("entropy estimates") {
    const auto e2 = entropy_estimate(entropy_series(full_shift(Alphabet::plain(3)), FolnerFamily::boxes, 6));
    CHECK(e2.value == doctest::Approx(std::log(3.0)));
    REQUIRE(e2.certified_upper);
    CHECK(*e2.certified_upper == doctest::Approx(std::log(3.0)));

    const auto gm = entropy_estimate(entropy_series(hard_square(1), FolnerFamily::boxes, 16));
    REQUIRE(gm.certified_upper);
    CHECK(*gm.certified_upper >= std::log(kPhi));
    CHECK(std::fabs(gm.value - std::log(kPhi)) < 0.02L);

    EntropySeries constant;
    constant.submultiplicative = true;
    for (int i = 1; i <= 4; ++i) constant.rows.push_back({i, 0, static_cast<std::size_t>(i), 0, 0.25L * i, 0.25L});
    CHECK(entropy_estimate(constant).value == 0.25L);
    CHECK(*entropy_estimate(constant).certified_upper == 0.25L);

    CHECK(std::fabs(spectral_entropy(hard_square(1)) - std::log(kPhi)) < 1e-15L);
    CHECK(std::fabs(spectral_entropy(full_shift(Alphabet::plain(5))) - std::log(5.0L)) < 1e-15L);
    CHECK(std::isinf(spectral_entropy(cellwise_shift(Alphabet::plain(2), {}))));
}

TEST_CASE("ball and box entropies agree") {
    for (const auto& s : {hard_square(1), hard_square(2), mcmullen()}) {
        const int m_ball = s.rank == 1 ? 10 : 5;
        const int m_box = s.rank == 1 ? 20 : 6;
        const auto balls = entropy_series(s, FolnerFamily::balls, m_ball);
        const auto boxes = entropy_series(s, FolnerFamily::boxes, m_box);
        CHECK(std::fabs(balls.rows.back().per_site - boxes.rows.back().per_site) < 0.05L);
    }
}

TEST_CASE("weighted entropy degenerations") {
    const auto mc = mcmullen();
    const auto desc = FolnerDescriptor::range(FolnerFamily::balls, 0, 4);
    const auto one = weighted_entropy_series(mc, desc, 1);
    const auto zero = weighted_entropy_series(mc, desc, 0);
    for (std::size_t i = 0; i < desc.indices.size(); ++i) {
        const auto w = GroupWindow::ball(desc.indices[i], GroupSpec(1));
        CHECK(one.rows[i].log_z == log_big(count_patterns(mc, w)));
        CHECK(zero.rows[i].log_z == log_big(BigInt(project(enumerate_patterns(mc, w)).size())));
    }
}

TEST_CASE("weighted entropy factorizes over cells for cellwise rules") {
    const auto mc = mcmullen();
    const long double w = 0.5L;
    const auto series = weighted_entropy_series(mc, FolnerDescriptor::range(FolnerFamily::balls, 0, 6), w);
    // single-cell fibers t(0)=2, t(1)=1
    const long double cell = std::log(std::pow(2.0L, w) + 1.0L);
    for (const auto& r : series.rows) CHECK(std::fabs(r.per_site - cell) < 1e-15L);
    CHECK(std::fabs(cell - std::log(std::sqrt(2.0L) + 1)) < 1e-18L);
}

TEST_CASE("weighted partition function is monotone in w") {
    SubshiftSpec s = full_shift(Alphabet::paired(3, 2));
    add_forbidden_pairs(s, 0, {{1, 1}, {3, 1}, {5, 3}, {0, 5}});
    const auto table = fiber_table(s, GroupWindow::ball(3, GroupSpec(1)));
    long double prev = -1;
    for (int i = 0; i <= 20; ++i) {
        const long double w = i / 20.0L;
        const auto row = weighted_row(table, w, 3);
        CHECK(weighted_bracket_holds(row, w));
        CHECK(row.log_z >= prev);
        prev = row.log_z;
    }
}

TEST_CASE("G x N digit entropy") {
    SubshiftSpec full3 = full_shift(Alphabet::plain(3), 2);
    const auto fs = gxn_entropy_series(full3, FolnerDescriptor::range(FolnerFamily::boxes, 1, 3), 3);
    for (const auto& r : fs.rows) CHECK(std::fabs(r.per_site - std::log(3.0L)) < 1e-15L);

    const auto vg = gxn_entropy_series(vertical_golden_digits(), FolnerDescriptor::range(FolnerFamily::boxes, 1, 1), 12);
    BigInt a = 1, b = 2;  // F_2, F_3
    for (const auto& r : vg.rows) {
        BigInt fib = b;  // F_{N+2}
        CHECK(r.count == fib);
        BigInt c = a + b;
        a = b;
        b = c;
    }

    // N = 1 is the layer subshift
    SubshiftSpec digits = full_shift(Alphabet::plain(2), 2);
    add_forbidden_pairs(digits, 0, {{1, 1}});
    add_forbidden_pairs(digits, 1, {{0, 1}});
    const auto layer = gxn_entropy_series(digits, FolnerDescriptor::range(FolnerFamily::boxes, 1, 8), 1);
    const auto plain = entropy_series(hard_square(1), FolnerFamily::boxes, 8);
    for (std::size_t i = 0; i < plain.rows.size(); ++i) CHECK(layer.rows[i].count == plain.rows[i].count);
}
