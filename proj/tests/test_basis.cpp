#include "oracles.hpp"
#include "thermalab/basis.hpp"

#include <catch2/catch_amalgamated.hpp>

#include <filesystem>

using namespace thermalab;

namespace {

long dense_rank(int L, int k, int refl)
{
    Eigen::SelfAdjointEigenSolver<Eigen::MatrixXcd> es(oracle::dense_projector(L, k, refl));
    long rank = 0;
    for (double ev : es.eigenvalues())
        if (ev > 0.5) ++rank;
    return rank;
}

} // namespace

TEST_CASE("two-site ring, k=0 R=+ has dimension 3")
{
    auto b = build_sector_basis({2}, {0, Reflection::even});
    CHECK(b->dim() == 3);
    CHECK(dense_rank(2, 0, 1) == 3);
}

TEST_CASE("sector dimensions equal the projector rank")
{
    for (int L : {3, 4, 5, 6}) {
        for (int k = 0; k < L; ++k) {
            auto b = build_sector_basis({L}, {k, Reflection::none});
            CHECK(static_cast<long>(b->dim()) == dense_rank(L, k, 0));
        }
        for (int k : {0, L / 2}) {
            if (L % 2 == 1 && k != 0) continue;
            for (auto r : {Reflection::even, Reflection::odd}) {
                auto b = build_sector_basis({L}, {k, r});
                CHECK(static_cast<long>(b->dim()) == dense_rank(L, k, static_cast<int>(r)));
            }
        }
    }
}

TEST_CASE("L=14 zero-momentum even sector matches the projector trace")
{
    auto b = build_sector_basis({14}, {0, Reflection::even});
    CHECK(static_cast<long>(b->dim()) == oracle::projector_trace(14, 0, 1));
}

TEST_CASE("sector completeness up to L=14")
{
    for (int L = 2; L <= 14; ++L) {
        std::size_t total = 0;
        for (const auto& s : momentum_sectors(L)) total += build_sector_basis({L}, s)->dim();
        CHECK(total == (std::size_t{1} << L));

        // With the reflection split at k = 0 and k = L/2.
        std::size_t split = 0;
        for (int k = 0; k < L; ++k) {
            if (k == 0 || 2 * k == L) {
                split += build_sector_basis({L}, {k, Reflection::even})->dim();
                split += build_sector_basis({L}, {k, Reflection::odd})->dim();
            } else {
                split += build_sector_basis({L}, {k, Reflection::none})->dim();
            }
        }
        CHECK(split == (std::size_t{1} << L));
    }
}

TEST_CASE("representatives are orbit minima with positive norms and consistent lookup")
{
    const int L = 10;
    auto b = build_sector_basis({L}, {0, Reflection::even});
    for (std::size_t i = 0; i < b->dim(); ++i) {
        const State s = b->representative(i);
        CHECK(b->norm(i) > 0.0);
        for (int j = 0; j < L; ++j) {
            CHECK(rotate_sites(s, j, L) >= s);
            CHECK(rotate_sites(reflect_sites(s, L), j, L) >= s);
        }
        const auto hit = b->lookup(rotate_sites(reflect_sites(s, L), 3, L));
        CHECK(hit.index == static_cast<std::int64_t>(i));
    }
    CHECK(std::is_sorted(b->representatives().begin(), b->representatives().end()));
}

TEST_CASE("invalid sectors are configuration errors")
{
    CHECK_THROWS_AS(build_sector_basis({6}, {1, Reflection::even}), ConfigError);
    CHECK_THROWS_AS(build_sector_basis({6}, {6, Reflection::none}), ConfigError);
    CHECK_THROWS_AS(build_sector_basis({1}, {0, Reflection::none}), ConfigError);
    CHECK_NOTHROW(build_sector_basis({6}, {3, Reflection::odd}));
}

TEST_CASE("binary basis cache round-trips and starts with the documented header")
{
    auto b = build_sector_basis({8}, {4, Reflection::odd});
    const std::string bytes = b->serialize();
    REQUIRE(bytes.substr(0, 4) == "THLB");
    CHECK(static_cast<unsigned char>(bytes[4]) == 1);   // version, little endian
    CHECK(static_cast<unsigned char>(bytes[8]) == 8);   // L
    CHECK(static_cast<unsigned char>(bytes[10]) == 4);  // k
    CHECK(static_cast<signed char>(bytes[12]) == -1);   // reflection
    const auto back = SymmetryBasis::deserialize(bytes);
    CHECK(back.representatives() == b->representatives());
    CHECK(back.norms() == b->norms());
    CHECK(back.serialize() == bytes);

    const auto dir = std::filesystem::temp_directory_path() / "thermalab_basis_cache_test";
    std::filesystem::remove_all(dir);
    auto first = load_or_build_basis({8}, {0, Reflection::even}, dir);
    auto second = load_or_build_basis({8}, {0, Reflection::even}, dir);
    CHECK(first->representatives() == second->representatives());
    std::filesystem::remove_all(dir);
}
