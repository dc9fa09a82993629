#include "synthset/error.hpp"
#include "synthset/image_io.hpp"

#include "testkit.hpp"

#include <doctest.h>

using namespace synthset;

TEST_CASE("format sniffing") {
  const std::vector<std::uint8_t> png{0x89, 'P', 'N', 'G', 0x0D, 0x0A, 0x1A, 0x0A, 0, 0, 0, 0};
  const std::vector<std::uint8_t> jpg{0xFF, 0xD8, 0xFF, 0xE0, 0, 0, 0, 0, 0, 0, 0, 0};
  const std::vector<std::uint8_t> webp{'R', 'I', 'F', 'F', 0, 0, 0, 0, 'W', 'E', 'B', 'P'};
  const std::vector<std::uint8_t> junk{'h', 'e', 'l', 'l', 'o'};
  CHECK(detect_format(png) == ImageFormat::png);
  CHECK(detect_format(jpg) == ImageFormat::jpeg);
  CHECK(detect_format(webp) == ImageFormat::webp);
  CHECK(detect_format(junk) == ImageFormat::unknown);
  CHECK(extension_for(ImageFormat::jpeg) == "jpg");
  CHECK(extension_for(ImageFormat::unknown).empty());
  CHECK_THROWS_AS(decode_image(webp), DataError);
  CHECK_THROWS_AS(decode_image(junk), DataError);
}

TEST_CASE("png round trip keeps rgba exactly") {
  CounterRng rng(3);
  RgbaImage img(17, 9);
  for (int c = 0; c < 4; ++c)
    for (Eigen::Index y = 0; y < 9; ++y)
      for (Eigen::Index x = 0; x < 17; ++x) img[c](y, x) = static_cast<std::uint8_t>(rng.uniform_int(0, 255));
  const auto decoded = decode_image(encode_png(img));
  CHECK(decoded.has_alpha);
  CHECK(decoded.pixels == img);

  Mask m = Mask::Constant(4, 5, false);
  m(1, 2) = true;
  const auto mask_png = decode_image(encode_png(m));
  CHECK_FALSE(mask_png.has_alpha);
  CHECK(mask_png.pixels[0](1, 2) == 255);
  CHECK(mask_png.pixels[0](0, 0) == 0);
}

TEST_CASE("jpeg round trip is close and opaque") {
  const RgbImage img = testkit::solid(32, 24, {200, 100, 50});
  const auto decoded = decode_image(encode_jpeg(img, 95));
  CHECK_FALSE(decoded.has_alpha);
  CHECK(decoded.pixels.width() == 32);
  CHECK(decoded.pixels.height() == 24);
  CHECK((decoded.pixels[3] == 255).all());
  CHECK(std::abs(int(decoded.pixels[0](10, 10)) - 200) <= 3);
}

TEST_CASE("write_bytes creates parent directories") {
  testkit::TempDir dir;
  const std::vector<std::uint8_t> bytes{1, 2, 3};
  write_bytes(dir / "a/b/c.bin", bytes);
  CHECK(read_bytes(dir / "a/b/c.bin") == bytes);
  CHECK_THROWS_AS(read_bytes(dir / "missing"), DataError);
}
