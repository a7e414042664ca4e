#include "doctest.h"

#include <cstdio>
#include <filesystem>
#include <fstream>
#include <string>

#include "roinet/checkpoint.hpp"
#include "roinet/csvreport.hpp"
#include "roinet/imageio.hpp"
#include "roinet/network.hpp"
#include "roinet/runconfig.hpp"
#include "roinet/synth.hpp"
#include "test_oracles.hpp"

using namespace roinet;

namespace {

std::string tmp_path(const std::string& name) {
  const auto dir = std::filesystem::temp_directory_path() / "roinet-io-tests";
  std::filesystem::create_directories(dir);
  return (dir / name).string();
}

Tensor snapped_random_image(Rng& rng, int h, int w) {
  Tensor img({3, h, w});
  for (long long i = 0; i < img.numel(); ++i)
    img[i] = std::round(rng.uniform() * 255.0) / 255.0;
  return img;
}

void write_bytes(const std::string& path, const std::string& bytes) {
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  out.write(bytes.data(), static_cast<std::streamsize>(bytes.size()));
}

}  // namespace

TEST_SUITE("io") {

TEST_CASE("ppm image round trip is exact on the 8-bit grid") {
  Rng rng(31);
  const Tensor img = snapped_random_image(rng, 5, 7);
  const std::string path = tmp_path("img.ppm");
  write_ppm(path, img);
  const Tensor back = read_ppm(path);
  REQUIRE(back.shape() == img.shape());
  for (long long i = 0; i < img.numel(); ++i) CHECK(back[i] == img[i]);

  // Endpoint quantization: 1.0 -> byte 255 -> 1.0.
  Tensor ones = Tensor::full({3, 1, 1}, 1.0);
  write_ppm(path, ones);
  CHECK(read_ppm(path)[0] == 1.0);
}

TEST_CASE("pgm mask round trip and label check") {
  LabelMask m(2, 2);
  m.v = {0, 1, 2, 0};
  const std::string path = tmp_path("mask.pgm");
  write_pgm_mask(path, m);
  LabelMask back = read_pgm_mask(path);
  CHECK(back.v == m.v);

  // Corrupt one payload byte to 3: the reader names the byte offset.
  std::ifstream in(path, std::ios::binary);
  std::string bytes((std::istreambuf_iterator<char>(in)),
                    std::istreambuf_iterator<char>());
  in.close();
  bytes[bytes.size() - 2] = 3;
  write_bytes(path, bytes);
  try {
    read_pgm_mask(path);
    FAIL("expected FormatError");
  } catch (const FormatError& e) {
    const std::string what = e.what();
    CHECK(what.find("byte " + std::to_string(bytes.size() - 2)) != std::string::npos);
  }
}

TEST_CASE("malformed netpbm headers are rejected with offsets") {
  const std::string path = tmp_path("bad.ppm");
  write_bytes(path, "P5 2 2 255\n----");
  CHECK_THROWS_AS(read_ppm(path), FormatError);  // wrong magic for ppm
  write_bytes(path, "P6 2 2 999\n");
  CHECK_THROWS_AS(read_ppm(path), FormatError);  // bad maxval
  write_bytes(path, "P6 2 2 255\nxx");
  CHECK_THROWS_AS(read_ppm(path), FormatError);  // truncated payload
  CHECK_THROWS_AS(read_ppm(tmp_path("missing.ppm")), IoError);
}

TEST_CASE("dataset manifest round trip") {
  GenConfig g;
  g.size = 48;
  g.class_counts = {2, 2, 2};
  g.master_seed = 5;
  const std::vector<Sample> ds = gen_dataset(g);
  const std::string dir = tmp_path("ds");
  write_dataset(dir, ds);
  const std::vector<Sample> back = read_dataset(dir);
  REQUIRE(back.size() == ds.size());
  for (std::size_t i = 0; i < ds.size(); ++i) {
    CHECK(back[i].label == ds[i].label);
    CHECK(back[i].mask.v == ds[i].mask.v);
    REQUIRE(back[i].image.shape() == ds[i].image.shape());
    for (long long j = 0; j < ds[i].image.numel(); ++j)
      CHECK(back[i].image[j] == ds[i].image[j]);
  }

  write_bytes(dir + "/manifest.txt", "cls0_000.ppm zero\n");
  CHECK_THROWS_AS(read_dataset(dir), FormatError);
}

TEST_CASE("checkpoint round trip reproduces forwards bitwise") {
  Rng rng(41);
  Network net(build_classifier_spec(3, 3, 32, {4, 4, 8, 8}), rng);
  const std::string path = tmp_path("net.ckpt");
  save_checkpoint(net, path);
  const Network back = load_checkpoint(path);

  const Tensor x = testutil::rand_tensor(rng, {2, 3, 32, 32}, 0.0, 1.0);
  const Tensor y0 = net.infer(x);
  const Tensor y1 = back.infer(x);
  REQUIRE(y0.shape() == y1.shape());
  for (long long i = 0; i < y0.numel(); ++i) CHECK(y0[i] == y1[i]);
}

TEST_CASE("checkpoint corruption is named") {
  Rng rng(42);
  Network net(build_classifier_spec(3, 3, 32, {4, 4, 8, 8}), rng);
  const std::string path = tmp_path("bad.ckpt");
  save_checkpoint(net, path);

  std::ifstream in(path, std::ios::binary);
  std::string bytes((std::istreambuf_iterator<char>(in)),
                    std::istreambuf_iterator<char>());
  in.close();

  std::string wrong_magic = bytes;
  wrong_magic[0] = 'X';
  write_bytes(path, wrong_magic);
  CHECK_THROWS_AS(load_checkpoint(path), FormatError);

  write_bytes(path, bytes.substr(0, bytes.size() / 2));
  CHECK_THROWS_AS(load_checkpoint(path), FormatError);

  CHECK_THROWS_AS(load_checkpoint(tmp_path("missing.ckpt")), IoError);
}

TEST_CASE("config text round trips defaults and rejects junk") {
  const RunConfig defaults;
  const RunConfig parsed = parse_config_text(default_config_text());
  CHECK(parsed.seed == defaults.seed);
  CHECK(parsed.epochs_roi == defaults.epochs_roi);
  CHECK(parsed.lr_cls == defaults.lr_cls);
  CHECK(parsed.cluster_thresholds == defaults.cluster_thresholds);
  CHECK(parsed.class_weight_mode == defaults.class_weight_mode);

  RunConfig over = parse_config_text("seed = 7\nepochs_roi = 3\n# comment\n");
  CHECK(over.seed == 7);
  CHECK(over.epochs_roi == 3);

  try {
    parse_config_text("seed = 1\nnot_a_key = 2\n");
    FAIL("expected ConfigError");
  } catch (const ConfigError& e) {
    CHECK(std::string(e.what()).find("line 2") != std::string::npos);
  }
  CHECK_THROWS_AS(parse_config_text("seed = banana\n"), ConfigError);
}

TEST_CASE("metrics csv appends one header and renders 4 decimals") {
  const std::string path = tmp_path("metrics.csv");
  std::remove(path.c_str());

  MetricsReport cls;
  cls.method = "plain";
  cls.seed = 9;
  cls.accuracy = 0.53125;
  cls.n_test = 32;
  append_metrics_csv(path, cls);

  MetricsReport seg;
  seg.method = "roi";
  seg.seed = 9;
  seg.mean_pixel_acc = 0.875;
  seg.mean_iou = 2.0 / 3.0;
  seg.n_test = 32;
  append_metrics_csv(path, seg);

  std::ifstream in(path);
  std::string text((std::istreambuf_iterator<char>(in)),
                   std::istreambuf_iterator<char>());
  CHECK(text ==
        "method,seed,accuracy,mean_pixel_acc,mean_iou,n_test\n"
        "plain,9,0.5312,,,32\n"
        "roi,9,,0.8750,0.6667,32\n");

  const std::vector<MetricsReport> rows = read_metrics_csv(path);
  REQUIRE(rows.size() == 2);
  CHECK(rows[0].method == "plain");
  CHECK(rows[0].accuracy == doctest::Approx(0.5312));
  CHECK(rows[0].mean_iou == -1.0);
  CHECK(rows[1].mean_iou == doctest::Approx(0.6667));

  const std::string table = render_metrics_table(rows);
  CHECK(table.find("plain") != std::string::npos);
  CHECK(table.find("0.6667") != std::string::npos);
}

TEST_CASE("montage has three panels with separators") {
  Rng rng(51);
  const Tensor img = snapped_random_image(rng, 8, 8);
  LabelMask truth(8, 8), pred(8, 8);
  truth.v[10] = 1;
  pred.v[10] = 2;
  const std::string path = tmp_path("montage.ppm");
  write_roi_montage(path, img, truth, pred);
  const Tensor m = read_ppm(path);
  CHECK(m.shape() == Shape{3, 8, 8 * 3 + 2 * 2});
}

}  // TEST_SUITE
