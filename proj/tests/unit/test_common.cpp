// SPDX-License-Identifier: Apache-2.0
#include "synthaug/common.hpp"

#include "../support/toy.hpp"

#include <doctest.h>

#include <algorithm>
#include <map>
#include <numeric>
#include <set>

using namespace synthaug;

TEST_SUITE("common") {
    TEST_CASE("error kinds map onto exit codes") {
        CHECK(exit_code_for(ErrorKind::config) == 2);
        CHECK(exit_code_for(ErrorKind::data) == 3);
        CHECK(exit_code_for(ErrorKind::divergence) == 3);
        CHECK(exit_code_for(ErrorKind::transport) == 4);
        CHECK(exit_code_for(ErrorKind::credential) == 4);
        CHECK(exit_code_for(ErrorKind::content) == 4);
        CHECK(exit_code_for(ErrorKind::shortfall) == 5);
        CHECK(to_string(ErrorKind::shortfall) == "shortfall");
    }

    TEST_CASE("hash reference vectors") {
        CHECK(fnv1a64("") == 0xcbf29ce484222325ULL);
        CHECK(fnv1a64("a") == 0xaf63dc4c8601ec8cULL);
        CHECK(splitmix64(0) == 0xe220a8397b1dcdafULL);
        CHECK(sha256_hex("abc") == "ba7816bf8f01cfea414140de5dae2223b00361a396177a9cb410ff61f20015ad");
        CHECK(sha256_hex("") == "e3b0c44298fc1c149afbf4c8996fb92427ae41e4649b934ca495991b7852b855");
    }

    TEST_CASE("named sub-seeds differ and are stable") {
        CHECK(derive_seed(42, "split") == derive_seed(42, "split"));
        CHECK(derive_seed(42, "split") != derive_seed(42, "balance"));
        CHECK(derive_seed(42, "split") != derive_seed(43, "split"));
    }

    TEST_CASE("rng is reproducible and bounded") {
        Rng a(7);
        Rng b(7);
        for (int i = 0; i < 100; ++i) {
            CHECK(a.next() == b.next());
        }
        Rng r(3);
        for (int i = 0; i < 1000; ++i) {
            CHECK(r.below(1) == 0);
            CHECK(r.below(7) < 7);
            const double u = r.unit();
            CHECK(u >= 0.0);
            CHECK(u < 1.0);
        }
        CHECK_THROWS_AS((void)r.below(0), std::invalid_argument);
    }

    TEST_CASE("bounded draws are close to uniform") {
        Rng r(11);
        constexpr int kBins = 6;
        constexpr int kDraws = 60000;
        std::array<int, kBins> counts{};
        for (int i = 0; i < kDraws; ++i) {
            ++counts[r.below(kBins)];
        }
        double chi2 = 0.0;
        const double expected = static_cast<double>(kDraws) / kBins;
        for (const int c : counts) {
            chi2 += (c - expected) * (c - expected) / expected;
        }
        // 5 degrees of freedom, p = 0.001 critical value
        CHECK(chi2 < 20.52);
    }

    TEST_CASE("normal draws have unit variance") {
        Rng r(5);
        double sum = 0.0;
        double sq = 0.0;
        constexpr int n = 40000;
        for (int i = 0; i < n; ++i) {
            const double x = r.normal();
            sum += x;
            sq += x * x;
        }
        CHECK(std::abs(sum / n) < 0.03);
        CHECK(std::abs(sq / n - 1.0) < 0.05);
    }

    TEST_CASE("shuffle yields a permutation and every position is reachable") {
        std::vector<int> v(50);
        std::iota(v.begin(), v.end(), 0);
        Rng r(9);
        auto w = v;
        r.shuffle(w);
        CHECK(std::is_permutation(v.begin(), v.end(), w.begin()));
        CHECK(w != v);

        std::map<int, std::set<int>> seen;
        for (int t = 0; t < 400; ++t) {
            std::vector<int> small{0, 1, 2, 3};
            r.shuffle(small);
            for (int i = 0; i < 4; ++i) {
                seen[small[i]].insert(i);
            }
        }
        for (const auto &[value, positions] : seen) {
            CHECK(positions.size() == 4);
        }
    }

    TEST_CASE("string helpers") {
        CHECK(trim("  a b \t\n") == "a b");
        CHECK(trim("   ").empty());
        CHECK(to_lower_ascii("AbC-Æ") == "abc-Æ");
        CHECK(starts_with_icase("I'm Sorry, no", "i'm sorry"));
        CHECK_FALSE(starts_with_icase("I", "I am"));
        CHECK(utf8_length("h\xC3\xA9llo") == 5);
        CHECK(utf8_length("") == 0);
        const auto lines = split_lines("a\r\nb\n\nc");
        REQUIRE(lines.size() == 4);
        CHECK(lines[0] == "a");
        CHECK(lines[1] == "b");
        CHECK(lines[2].empty());
        CHECK(lines[3] == "c");
    }

    TEST_CASE("atomic writes leave no temporaries behind") {
        toy::TempDir dir("common");
        const auto path = dir.path() / "nested" / "file.txt";
        write_file_atomic(path, "first");
        write_file_atomic(path, "second");
        CHECK(read_file(path) == "second");
        std::size_t entries = 0;
        for ([[maybe_unused]] const auto &e : std::filesystem::directory_iterator(path.parent_path())) {
            ++entries;
        }
        CHECK(entries == 1);
        CHECK(sha256_file(path) == sha256_hex("second"));
    }

    TEST_CASE("missing files are data errors") {
        try {
            (void)read_file("/nonexistent/synthaug/file");
            FAIL("expected an error");
        } catch (const Error &e) {
            CHECK(e.kind() == ErrorKind::data);
        }
    }

    TEST_CASE("jsonl iteration skips blank lines and keeps line numbers") {
        toy::TempDir dir("jsonl");
        const auto path = dir.path() / "x.jsonl";
        write_file_atomic(path, "{\"a\":1}\n\n  \n{\"a\":2}\r\n");
        std::vector<std::pair<std::size_t, std::string>> seen;
        for_each_jsonl_line(path, [&](std::size_t n, std::string_view line) { seen.emplace_back(n, line); });
        REQUIRE(seen.size() == 2);
        CHECK(seen[0].first == 1);
        CHECK(seen[1].first == 4);
        CHECK(seen[1].second == "{\"a\":2}");
    }
}
