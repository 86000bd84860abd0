#include <doctest.h>

#include <cstdint>
#include <filesystem>
#include <fstream>

#include "ttp/data.hpp"
#include "ttp/errors.hpp"

using namespace ttp;

namespace {

namespace fs = std::filesystem;

void put_be32(std::ofstream& os, std::uint32_t v) {
  unsigned char b[4] = {static_cast<unsigned char>(v >> 24), static_cast<unsigned char>(v >> 16),
                        static_cast<unsigned char>(v >> 8), static_cast<unsigned char>(v)};
  os.write(reinterpret_cast<const char*>(b), 4);
}

struct IdxFixture {
  std::string images, labels;

  // 4 hand-crafted 28x28 images; reference writer independent of save_idx
  IdxFixture() {
    const auto dir = fs::temp_directory_path();
    images = (dir / "ttp_idx_images_test").string();
    labels = (dir / "ttp_idx_labels_test").string();
    std::ofstream imgs(images, std::ios::binary);
    put_be32(imgs, 0x00000803u);
    put_be32(imgs, 4);
    put_be32(imgs, 28);
    put_be32(imgs, 28);
    for (int i = 0; i < 4; ++i)
      for (int px = 0; px < 784; ++px)
        imgs.put(char(static_cast<unsigned char>((px + i * 7) % 256)));
    std::ofstream labs(labels, std::ios::binary);
    put_be32(labs, 0x00000801u);
    put_be32(labs, 4);
    for (unsigned char y : {2, 0, 9, 5}) labs.put(char(y));
  }
  ~IdxFixture() {
    fs::remove(images);
    fs::remove(labels);
  }
};

}  // namespace

TEST_CASE("load_idx parses the hand-crafted fixture") {
  IdxFixture fx;
  const LabeledDataset data = load_idx(fx.images, fx.labels);
  CHECK(data.size() == 4);
  CHECK(data.dim() == 784);
  CHECK(data.labels == std::vector<int>{2, 0, 9, 5});
  // pixel 255 scales to exactly 1.0 and pixel 0 to 0.0
  CHECK(data.features(0, 255) == 1.0);
  CHECK(data.features(0, 0) == 0.0);
  CHECK(data.features(1, 3) == doctest::Approx(10.0 / 255.0));
  CHECK(data.features.maxCoeff() <= 1.0);
  CHECK(data.features.minCoeff() >= 0.0);
}

TEST_CASE("load_idx rejects malformed input") {
  IdxFixture fx;
  SUBCASE("labels file used as images (wrong magic)") {
    CHECK_THROWS_AS(load_idx(fx.labels, fx.labels), FormatError);
  }
  SUBCASE("images file used as labels (magic 0x803 rejected)") {
    CHECK_THROWS_AS(load_idx(fx.images, fx.images), FormatError);
  }
  SUBCASE("count mismatch names the offending offset") {
    const auto bad = (fs::temp_directory_path() / "ttp_idx_badcount").string();
    std::ofstream labs(bad, std::ios::binary);
    put_be32(labs, 0x00000801u);
    put_be32(labs, 3);
    for (unsigned char y : {1, 2, 3}) labs.put(char(y));
    labs.close();
    try {
      load_idx(fx.images, bad);
      FAIL("expected FormatError");
    } catch (const FormatError& e) {
      CHECK(std::string(e.what()).find("offset 4") != std::string::npos);
    }
    fs::remove(bad);
  }
  SUBCASE("truncated image payload reports the byte offset") {
    const auto bad = (fs::temp_directory_path() / "ttp_idx_trunc").string();
    std::ofstream imgs(bad, std::ios::binary);
    put_be32(imgs, 0x00000803u);
    put_be32(imgs, 4);
    put_be32(imgs, 28);
    put_be32(imgs, 28);
    for (int px = 0; px < 784 + 100; ++px) imgs.put(char(0));  // not enough for 4 images
    imgs.close();
    try {
      load_idx(bad, fx.labels);
      FAIL("expected FormatError");
    } catch (const FormatError& e) {
      CHECK(std::string(e.what()).find("truncated") != std::string::npos);
    }
    fs::remove(bad);
  }
}

TEST_CASE("save_idx then load_idx reproduces quantized pixels") {
  LabeledDataset data = make_synth_digits(20, 3);
  const auto dir = fs::temp_directory_path();
  const auto imgs = (dir / "ttp_idx_rt_images").string();
  const auto labs = (dir / "ttp_idx_rt_labels").string();
  save_idx(data, imgs, labs);
  const LabeledDataset back = load_idx(imgs, labs);
  CHECK(back.size() == data.size());
  CHECK(back.labels == data.labels);
  // quantization to bytes, then /255: error at most half a level
  CHECK((back.features - data.features).cwiseAbs().maxCoeff() <= 0.5 / 255.0 + 1e-12);
  fs::remove(imgs);
  fs::remove(labs);
}

TEST_CASE("make_blobs") {
  SUBCASE("shape and determinism") {
    const auto a = make_blobs(3, 50, 2, 1.0, 9);
    CHECK(a.size() == 150);
    CHECK(a.dim() == 2);
    const auto b = make_blobs(3, 50, 2, 1.0, 9);
    CHECK(a.features == b.features);
    CHECK(a.labels == b.labels);
  }
  SUBCASE("spread 0 collapses within-class variance") {
    const auto d = make_blobs(2, 10, 3, 0.0, 4);
    for (int i = 1; i < 10; ++i) {
      CHECK((d.features.row(i) - d.features.row(0)).cwiseAbs().maxCoeff() == 0.0);
      CHECK((d.features.row(10 + i) - d.features.row(10)).cwiseAbs().maxCoeff() == 0.0);
    }
    CHECK((d.features.row(0) - d.features.row(10)).norm() > 0.1);
  }
  SUBCASE("bad sizes rejected") { CHECK_THROWS_AS(make_blobs(1, 5, 2, 1.0, 0), DomainError); }
}

TEST_CASE("make_synth_digits") {
  const auto a = make_synth_digits(50, 7);
  CHECK(a.size() == 50);
  CHECK(a.dim() == 784);
  CHECK(a.features.minCoeff() >= 0.0);
  CHECK(a.features.maxCoeff() <= 1.0);
  const auto b = make_synth_digits(50, 7);
  CHECK(a.features == b.features);
  int classes_seen = 0;
  std::vector<bool> seen(10, false);
  for (int y : a.labels)
    if (!seen[std::size_t(y)]) {
      seen[std::size_t(y)] = true;
      ++classes_seen;
    }
  CHECK(classes_seen >= 8);
}

TEST_CASE("select_forget") {
  const auto data = make_blobs(3, 40, 2, 1.0, 12);
  SUBCASE("deterministic, disjoint, covering") {
    const Split a = select_forget(data, 30, 5);
    const Split b = select_forget(data, 30, 5);
    CHECK(a.forget_idx == b.forget_idx);
    CHECK(a.retain_idx == b.retain_idx);
    a.validate();
    CHECK(a.forget_idx.size() == 30);
    CHECK(a.retain_idx.size() == 90);
  }
  SUBCASE("count = 1 is valid") {
    const Split s = select_forget(data, 1, 2);
    CHECK(s.forget_idx.size() == 1);
  }
  SUBCASE("count = n leaves an empty retain side") {
    const Split s = select_forget(data, int(data.size()), 2);
    CHECK(s.retain_idx.empty());
  }
  SUBCASE("count > n rejected") {
    CHECK_THROWS_AS(select_forget(data, int(data.size()) + 1, 2), DomainError);
  }
}

TEST_CASE("split save/load round-trip") {
  const auto data = make_blobs(2, 25, 2, 1.0, 21);
  const Split s = select_forget(data, 7, 3);
  const auto path = (fs::temp_directory_path() / "ttp_split_test.txt").string();
  save_split(s, path);
  const Split r = load_split(data, path);
  CHECK(r.forget_idx == s.forget_idx);
  CHECK(r.retain_idx == s.retain_idx);
  fs::remove(path);
}
