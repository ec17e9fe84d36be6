#include "canet/dataset.hpp"

#include <cstdio>
#include <fstream>

#include "canet/errors.hpp"
#include "canet/image_io.hpp"

namespace fs = std::filesystem;

namespace canet {

std::array<double, 3> Dataset::channel_mean() const {
  std::array<double, 3> sum{0.0, 0.0, 0.0};
  double count = 0.0;
  for (const Sample& s : samples) {
    const Shape sh = s.image.shape();
    for (int c = 0; c < 3 && c < sh.c; ++c) {
      const double* p = s.image.plane(0, c);
      for (std::size_t i = 0; i < sh.plane(); ++i) sum[c] += p[i];
    }
    count += static_cast<double>(sh.plane());
  }
  if (count > 0) {
    for (double& v : sum) v /= count;
  }
  return sum;
}

std::string sample_id(int index) {
  char buf[16];
  std::snprintf(buf, sizeof(buf), "%05d", index);
  return buf;
}

Dataset generate_dataset(const SceneSpec& spec, int count, int first) {
  Dataset data;
  for (int i = first; i < first + count; ++i) {
    data.ids.push_back(sample_id(i));
    data.samples.push_back(generate_scene(spec, static_cast<std::uint64_t>(i)));
  }
  return data;
}

void write_dataset(const fs::path& dir, const Dataset& data) {
  std::error_code ec;
  fs::create_directories(dir / "images", ec);
  if (!ec) fs::create_directories(dir / "labels", ec);
  if (ec) {
    throw IoError("cannot create dataset directory '" + dir.string() +
                  "': " + ec.message());
  }
  std::ofstream manifest(dir / "manifest.txt", std::ios::trunc);
  if (!manifest) {
    throw IoError("cannot write '" + (dir / "manifest.txt").string() + "'");
  }
  for (std::size_t i = 0; i < data.size(); ++i) {
    write_image(dir / "images" / (data.ids[i] + ".ppm"), data.samples[i].image);
    write_label(dir / "labels" / (data.ids[i] + ".pgm"), data.samples[i].label);
    manifest << data.ids[i] << '\n';
  }
  if (!manifest) {
    throw IoError("write failed for '" + (dir / "manifest.txt").string() + "'");
  }
}

Dataset read_dataset(const fs::path& dir) {
  const fs::path manifest_path = dir / "manifest.txt";
  std::ifstream manifest(manifest_path);
  if (!manifest) {
    throw IoError("cannot open dataset manifest '" + manifest_path.string() +
                  "'");
  }
  Dataset data;
  std::string id;
  while (std::getline(manifest, id)) {
    if (id.empty()) continue;
    Sample s{read_image(dir / "images" / (id + ".ppm")),
             read_label(dir / "labels" / (id + ".pgm"))};
    if (s.label.h != s.image.shape().h || s.label.w != s.image.shape().w) {
      throw IoError("image and label extents differ for sample '" + id + "'");
    }
    data.ids.push_back(id);
    data.samples.push_back(std::move(s));
  }
  return data;
}

}  // namespace canet
