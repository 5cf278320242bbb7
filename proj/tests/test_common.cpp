#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include "doctest.h"

#include <algorithm>
#include <cstdio>
#include <filesystem>

#include "elp/common.hpp"
#include "elp/matrix.hpp"

using namespace elp;

TEST_CASE("round half even ties") {
  CHECK(round_half_even(0.5) == 0.0);
  CHECK(round_half_even(1.5) == 2.0);
  CHECK(round_half_even(2.5) == 2.0);
  CHECK(round_half_even(3.5) == 4.0);
  CHECK(round_half_even(-0.5) == 0.0);
  CHECK(round_half_even(-2.5) == -2.0);
  CHECK(round_half_even(62.5) == 62.0);
  CHECK(round_half_even(112.5) == 112.0);
  CHECK(round_half_even(2.4999) == 2.0);
  CHECK(round_half_even(2.5001) == 3.0);
  CHECK(round_half_even_ll(-3.5) == -4);
  // -0.4 rounds to -0; the helper normalizes the sign
  CHECK(std::signbit(round_half_even(-0.4)) == false);
}

TEST_CASE("fnv1a reference vectors") {
  CHECK(fnv1a(std::string{}) == 0xcbf29ce484222325ull);
  CHECK(fnv1a(std::string{"a"}) == 0xaf63dc4c8601ec8cull);
  CHECK(fnv1a(std::string{"foobar"}) == 0x85944171f73967e8ull);
  // chaining equals one pass
  std::uint64_t h = fnv1a(std::string{"foo"});
  CHECK(fnv1a(std::string{"bar"}, h) == fnv1a(std::string{"foobar"}));
}

TEST_CASE("hex64 formatting") {
  CHECK(hex64(0) == "0000000000000000");
  CHECK(hex64(0xdeadbeefull) == "00000000deadbeef");
  CHECK(hex64(UINT64_MAX) == "ffffffffffffffff");
}

TEST_CASE("mean and population stddev") {
  const std::vector<double> x = {1, 2, 3, 4};
  CHECK(mean(x) == doctest::Approx(2.5));
  CHECK(stddev(x) == doctest::Approx(std::sqrt(1.25)));
  const std::vector<double> flat = {3, 3, 3};
  CHECK(stddev(flat) == 0.0);
}

TEST_CASE("rng determinism and child independence") {
  Rng a = make_rng(42);
  Rng b = make_rng(42);
  for (int i = 0; i < 5; ++i) CHECK(a.next_u64() == b.next_u64());

  Rng c1 = make_rng(42).child(1);
  Rng c2 = make_rng(42).child(2);
  CHECK(c1.next_u64() != c2.next_u64());
  // child derivation is stable and independent of parent's draw position
  Rng parent = make_rng(7);
  parent.next_u64();
  CHECK(parent.child(3).next_u64() == make_rng(7).child(3).next_u64());
}

TEST_CASE("rng uniform and uniform_int ranges") {
  Rng r = make_rng(1);
  for (int i = 0; i < 1000; ++i) {
    const double u = r.uniform();
    CHECK(u >= 0.0);
    CHECK(u < 1.0);
  }
  std::vector<int> hits(7, 0);
  for (int i = 0; i < 7000; ++i) ++hits[r.uniform_int(7)];
  for (int h : hits) CHECK(h > 0);
  CHECK_THROWS_AS(r.uniform_int(0), Error);
}

TEST_CASE("rng normal moments") {
  Rng r = make_rng(5);
  std::vector<double> x(20000);
  for (double& v : x) v = r.normal();
  CHECK(mean(x) == doctest::Approx(0.0).epsilon(1).scale(0.03));
  CHECK(stddev(x) == doctest::Approx(1.0).epsilon(0.03));
}

TEST_CASE("rng shuffle permutes deterministically") {
  std::vector<int> v = {1, 2, 3, 4, 5, 6, 7, 8};
  std::vector<int> w = v;
  Rng r1 = make_rng(9);
  Rng r2 = make_rng(9);
  r1.shuffle(v);
  r2.shuffle(w);
  CHECK(v == w);
  std::vector<int> sorted = v;
  std::sort(sorted.begin(), sorted.end());
  CHECK(sorted == std::vector<int>{1, 2, 3, 4, 5, 6, 7, 8});
}

TEST_CASE("file io round trips") {
  namespace fs = std::filesystem;
  const auto dir = fs::temp_directory_path() / "elp_test_common";
  fs::create_directories(dir);
  const std::string path = (dir / "blob.bin").string();

  std::vector<std::uint8_t> bytes = {0, 1, 2, 255, 128, 7};
  write_file_bytes(path, bytes);
  CHECK(read_file_bytes(path) == bytes);

  const std::string text = "line1\nline2\n";
  write_file_text(path, text);
  CHECK(read_file_text(path) == text);

  CHECK_THROWS_AS(read_file_bytes((dir / "missing").string()), IoError);
  fs::remove_all(dir);
}

TEST_CASE("matrix save/load round trip") {
  namespace fs = std::filesystem;
  const auto dir = fs::temp_directory_path() / "elp_test_matrix";
  fs::create_directories(dir);
  const std::string base = (dir / "m").string();

  Matrix m(3, 4);
  Rng r = make_rng(3);
  for (double& v : m.data) v = r.normal();
  save_matrix(base, m, {{"kind", "test"}, {"note", "x"}});

  std::map<std::string, std::string> meta;
  Matrix back = load_matrix(base, &meta);
  CHECK(back == m);
  CHECK(meta.at("kind") == "test");
  CHECK(matrix_content_hash(back) == matrix_content_hash(m));

  // tampering with the payload must be caught
  auto bytes = read_file_bytes(base + ".bin");
  bytes[5] ^= 0xff;
  write_file_bytes(base + ".bin", bytes);
  CHECK_THROWS_AS(load_matrix(base), Error);
  fs::remove_all(dir);
}
