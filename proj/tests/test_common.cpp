#include <doctest.h>

#include <set>
#include <vector>

#include "factcheck/common.hpp"
#include "factcheck/linalg.hpp"

using namespace factcheck;

TEST_CASE("fnv1a matches the published test vectors") {
    // Reference values for 64-bit FNV-1a.
    CHECK(fnv1a("") == 0xcbf29ce484222325ULL);
    CHECK(fnv1a("a") == 0xaf63dc4c8601ec8cULL);
    CHECK(fnv1a("foobar") == 0x85944171f73967e8ULL);
}

TEST_CASE("rng streams are deterministic per seed") {
    Rng a(42);
    Rng b(42);
    for (int i = 0; i < 100; ++i) CHECK(a.next_u64() == b.next_u64());

    Rng c(42);
    Rng d(43);
    bool differs = false;
    for (int i = 0; i < 10; ++i) differs = differs || (c.next_u64() != d.next_u64());
    CHECK(differs);
}

TEST_CASE("next_double stays in the half-open unit interval") {
    Rng rng(7);
    for (int i = 0; i < 10000; ++i) {
        const double x = rng.next_double();
        CHECK(x >= 0.0);
        CHECK(x < 1.0);
    }
}

TEST_CASE("next_index covers the full range") {
    Rng rng(11);
    std::set<std::size_t> seen;
    for (int i = 0; i < 1000; ++i) seen.insert(rng.next_index(5));
    CHECK(seen == std::set<std::size_t>{0, 1, 2, 3, 4});
}

TEST_CASE("shuffle permutes without loss") {
    Rng rng(3);
    std::vector<int> v{1, 2, 3, 4, 5, 6, 7};
    auto sorted = v;
    rng.shuffle(v);
    CHECK(v.size() == 7);
    auto resorted = v;
    std::sort(resorted.begin(), resorted.end());
    CHECK(resorted == sorted);
}

TEST_CASE("string helpers") {
    CHECK(trim("  abc \t") == "abc");
    CHECK(trim("") == "");
    CHECK(to_lower("MiXeD") == "mixed");
    CHECK(contains("site-logo.png", "logo"));
    CHECK_FALSE(contains("photo.png", "logo"));
    CHECK(split_whitespace("  a  b\tc ") == std::vector<std::string>{"a", "b", "c"});
    CHECK(split("a,b,,c", ',') == std::vector<std::string>{"a", "b", "", "c"});
    CHECK(join({"x", "y"}, "-") == "x-y");
}

TEST_CASE("cosine similarity on a frozen pair") {
    // cos((1,2),(2,1)) = 4/5.
    const Vec a{1.0, 2.0};
    const Vec b{2.0, 1.0};
    CHECK(cosine_similarity(a, b) == doctest::Approx(0.8).epsilon(1e-12));
}

TEST_CASE("cosine similarity rejects degenerate input") {
    const Vec zero{0.0, 0.0};
    const Vec ok{1.0, 0.0};
    CHECK_THROWS_AS((void)cosine_similarity(zero, ok), ZeroVector);
    const Vec shorter{1.0};
    CHECK_THROWS_AS((void)cosine_similarity(shorter, ok), ShapeMismatch);
}

TEST_CASE("softmax sums to one and is shift invariant") {
    const Vec logits{1.0, 2.0, 3.0};
    const Vec p = softmax(logits);
    double sum = 0.0;
    for (double x : p) sum += x;
    CHECK(sum == doctest::Approx(1.0).epsilon(1e-12));

    Vec shifted = logits;
    for (double& x : shifted) x += 100.0;
    const Vec q = softmax(shifted);
    for (std::size_t i = 0; i < p.size(); ++i) CHECK(p[i] == doctest::Approx(q[i]).epsilon(1e-12));
}

TEST_CASE("logsumexp handles large magnitudes") {
    const Vec big{1000.0, 1000.0};
    CHECK(logsumexp(big) == doctest::Approx(1000.0 + std::log(2.0)).epsilon(1e-12));
}

TEST_CASE("matvec and vecmat agree with hand expansion") {
    Mat m(2, 3);
    // [[1,2,3],[4,5,6]]
    m.at(0, 0) = 1; m.at(0, 1) = 2; m.at(0, 2) = 3;
    m.at(1, 0) = 4; m.at(1, 1) = 5; m.at(1, 2) = 6;

    const Vec x{1.0, 1.0, 1.0};
    const Vec y = matvec(m, x);
    CHECK(y == Vec{6.0, 15.0});

    const Vec r{1.0, 2.0};
    const Vec z = vecmat(r, m);
    CHECK(z == Vec{9.0, 12.0, 15.0});
}

TEST_CASE("identity matrix") {
    const Mat eye = Mat::identity(3);
    for (std::size_t r = 0; r < 3; ++r)
        for (std::size_t c = 0; c < 3; ++c)
            CHECK(eye.at(r, c) == (r == c ? 1.0 : 0.0));
}
