#include "synthset/matting.hpp"

#include "synthset/image_io.hpp"

#include <sys/types.h>
#include <sys/wait.h>
#include <signal.h>
#include <unistd.h>

#include <atomic>
#include <deque>
#include <filesystem>
#include <thread>

namespace synthset {

Cutout make_cutout(RgbaImage pixels, Role role, std::string source_id) {
  if (pixels.width() < 1 || pixels.height() < 1) throw DataError("cutout has no pixels");
  if ((pixels[3] == 0).all()) throw DataError("cutout " + source_id + " is fully transparent");
  return Cutout{std::move(pixels), role, std::move(source_id), std::nullopt};
}

namespace {

namespace fs = std::filesystem;

std::string shell_quote(const std::string& s) {
  std::string out = "'";
  for (char c : s) {
    if (c == '\'')
      out += "'\\''";
    else
      out += c;
  }
  return out + "'";
}

std::string replace_all(std::string text, const std::string& from, const std::string& to) {
  for (std::size_t pos = text.find(from); pos != std::string::npos; pos = text.find(from, pos + to.size()))
    text.replace(pos, from.size(), to);
  return text;
}

class TempDir {
 public:
  TempDir() {
    static std::atomic<unsigned> counter{0};
    path_ = fs::temp_directory_path() /
            ("synthset-" + std::to_string(::getpid()) + "-" + std::to_string(counter++));
    fs::create_directories(path_);
  }
  ~TempDir() {
    std::error_code ec;
    fs::remove_all(path_, ec);
  }
  TempDir(const TempDir&) = delete;
  TempDir& operator=(const TempDir&) = delete;
  const fs::path& path() const { return path_; }

 private:
  fs::path path_;
};

// Returns the exit status, or nullopt on timeout (the process group is killed).
std::optional<int> run_shell(const std::string& command, std::chrono::milliseconds timeout) {
  const pid_t pid = ::fork();
  if (pid < 0) throw MattingError("fork failed");
  if (pid == 0) {
    ::setpgid(0, 0);
    ::execl("/bin/sh", "sh", "-c", command.c_str(), static_cast<char*>(nullptr));
    ::_exit(127);
  }
  const auto deadline = std::chrono::steady_clock::now() + timeout;
  int status = 0;
  for (;;) {
    const pid_t done = ::waitpid(pid, &status, WNOHANG);
    if (done == pid) break;
    if (done < 0) throw MattingError("waitpid failed");
    if (std::chrono::steady_clock::now() >= deadline) {
      ::kill(-pid, SIGKILL);
      ::kill(pid, SIGKILL);
      ::waitpid(pid, &status, 0);
      return std::nullopt;
    }
    std::this_thread::sleep_for(std::chrono::milliseconds(5));
  }
  if (WIFEXITED(status)) return WEXITSTATUS(status);
  return 128 + (WIFSIGNALED(status) ? WTERMSIG(status) : 0);
}

}  // namespace

RgbaImage remove_background_external(const RgbImage& image, const std::string& command_template,
                                     std::chrono::milliseconds timeout) {
  if (command_template.find("{in}") == std::string::npos ||
      command_template.find("{out}") == std::string::npos)
    throw ConfigError("matting command must contain {in} and {out} placeholders");

  TempDir dir;
  const fs::path in = dir.path() / "input.png";
  const fs::path out = dir.path() / "output.png";
  write_bytes(in, encode_png(with_alpha(image)));

  std::string command = replace_all(command_template, "{in}", shell_quote(in.string()));
  command = replace_all(command, "{out}", shell_quote(out.string()));

  const auto status = run_shell(command, timeout);
  if (!status) throw MattingError("matting command timed out");
  if (*status != 0) throw MattingError("matting command exited with status " + std::to_string(*status));
  if (!fs::exists(out)) throw MattingError("matting command produced no output");

  DecodedImage decoded;
  try {
    decoded = read_image(out);
  } catch (const DataError& e) {
    throw MattingError(std::string("malformed matting output: ") + e.what());
  }
  if (!decoded.has_alpha) throw MattingError("malformed matting output: no alpha channel");
  if (decoded.pixels.width() != image.width() || decoded.pixels.height() != image.height())
    throw MattingError("malformed matting output: dimensions differ from input");
  return std::move(decoded.pixels);
}

Mask erode3(const Mask& mask) {
  const Eigen::Index h = mask.rows(), w = mask.cols();
  Mask out = Mask::Constant(h, w, false);
  for (Eigen::Index y = 0; y < h; ++y)
    for (Eigen::Index x = 0; x < w; ++x) {
      bool all = true;
      for (int dy = -1; dy <= 1 && all; ++dy)
        for (int dx = -1; dx <= 1 && all; ++dx) {
          const Eigen::Index ny = y + dy, nx = x + dx;
          all = ny >= 0 && nx >= 0 && ny < h && nx < w && mask(ny, nx);
        }
      out(y, x) = all;
    }
  return out;
}

Mask dilate3(const Mask& mask) {
  const Eigen::Index h = mask.rows(), w = mask.cols();
  Mask out = Mask::Constant(h, w, false);
  for (Eigen::Index y = 0; y < h; ++y)
    for (Eigen::Index x = 0; x < w; ++x) {
      bool any = false;
      for (int dy = -1; dy <= 1 && !any; ++dy)
        for (int dx = -1; dx <= 1 && !any; ++dx) {
          const Eigen::Index ny = y + dy, nx = x + dx;
          any = ny >= 0 && nx >= 0 && ny < h && nx < w && mask(ny, nx);
        }
      out(y, x) = any;
    }
  return out;
}

RgbaImage flood_fill_matte(const RgbImage& image, double color_tolerance) {
  const int h = static_cast<int>(image.height()), w = static_cast<int>(image.width());
  if (h < 3 || w < 3) throw DataError("flood fill needs at least 3x3 pixels");

  const double tol_sq = color_tolerance * color_tolerance;
  Mask background = Mask::Constant(h, w, false);
  std::deque<Eigen::Vector2i> queue;

  const auto grow_from = [&](int sx, int sy) {
    if (background(sy, sx)) return;
    Eigen::Vector3d sum(image[0](sy, sx), image[1](sy, sx), image[2](sy, sx));
    double count = 1.0;
    background(sy, sx) = true;
    queue.emplace_back(sx, sy);
    constexpr int offsets[4][2] = {{1, 0}, {-1, 0}, {0, 1}, {0, -1}};
    while (!queue.empty()) {
      const Eigen::Vector2i p = queue.front();
      queue.pop_front();
      for (const auto& o : offsets) {
        const int nx = p.x() + o[0], ny = p.y() + o[1];
        if (nx < 0 || ny < 0 || nx >= w || ny >= h || background(ny, nx)) continue;
        const Eigen::Vector3d color(image[0](ny, nx), image[1](ny, nx), image[2](ny, nx));
        if ((color - sum / count).squaredNorm() > tol_sq) continue;
        background(ny, nx) = true;
        sum += color;
        count += 1.0;
        queue.emplace_back(nx, ny);
      }
    }
  };
  // Border pixels in a fixed clockwise order starting at the top-left corner.
  for (int x = 0; x < w; ++x) grow_from(x, 0);
  for (int y = 1; y < h; ++y) grow_from(w - 1, y);
  for (int x = w - 2; x >= 0; --x) grow_from(x, h - 1);
  for (int y = h - 2; y >= 1; --y) grow_from(0, y);

  Mask foreground = !background;
  foreground = dilate3(erode3(foreground));  // opening
  foreground = erode3(dilate3(foreground));  // closing

  // Background must stay reachable from the border; enclosed pockets become foreground.
  Mask reachable = Mask::Constant(h, w, false);
  for (int y = 0; y < h; ++y)
    for (int x = 0; x < w; ++x) {
      const bool border = x == 0 || y == 0 || x == w - 1 || y == h - 1;
      if (border && !foreground(y, x) && !reachable(y, x)) {
        reachable(y, x) = true;
        queue.emplace_back(x, y);
      }
    }
  while (!queue.empty()) {
    const Eigen::Vector2i p = queue.front();
    queue.pop_front();
    constexpr int offsets[4][2] = {{1, 0}, {-1, 0}, {0, 1}, {0, -1}};
    for (const auto& o : offsets) {
      const int nx = p.x() + o[0], ny = p.y() + o[1];
      if (nx < 0 || ny < 0 || nx >= w || ny >= h || foreground(ny, nx) || reachable(ny, nx)) continue;
      reachable(ny, nx) = true;
      queue.emplace_back(nx, ny);
    }
  }
  foreground = !reachable;

  if (!foreground.any()) throw MattingError("no foreground");
  RgbaImage out = with_alpha(image, 0);
  out[3] = foreground.cast<std::uint8_t>() * std::uint8_t(255);
  return out;
}

}  // namespace synthset
