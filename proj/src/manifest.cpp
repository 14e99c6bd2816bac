#include "rsonerf/dataset.hpp"

#include <json.hpp>

#include <cmath>
#include <fstream>
#include <set>

namespace rsonerf::data {

using nlohmann::json;

namespace {

double require_number(const json& j, const char* key) {
  if (!j.contains(key))
    throw ContractError(cat("manifest: missing field '", key, "'"));
  if (!j.at(key).is_number())
    throw ContractError(cat("manifest: field '", key, "' must be a number"));
  return j.at(key).get<double>();
}

}  // namespace

DatasetManifest load_manifest(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw ContractError("load_manifest: cannot open " + path);
  json j;
  try {
    in >> j;
  } catch (const json::parse_error& e) {
    throw ContractError(cat("manifest: ", path, " is not valid JSON: ", e.what()));
  }

  DatasetManifest m;
  const double w = require_number(j, "w");
  const double h = require_number(j, "h");
  m.intrinsics.width = static_cast<int>(w);
  m.intrinsics.height = static_cast<int>(h);
  if (j.contains("fl_x")) {
    m.intrinsics.fx = require_number(j, "fl_x");
    m.intrinsics.fy = j.contains("fl_y") ? require_number(j, "fl_y") : m.intrinsics.fx;
  } else if (j.contains("camera_angle_x")) {
    const double angle = require_number(j, "camera_angle_x");
    m.intrinsics.fx = m.intrinsics.fy = 0.5 * w / std::tan(0.5 * angle);
  } else {
    throw ContractError("manifest: missing field 'fl_x' (or 'camera_angle_x')");
  }
  m.intrinsics.cx = j.contains("cx") ? require_number(j, "cx") : 0.5 * w;
  m.intrinsics.cy = j.contains("cy") ? require_number(j, "cy") : 0.5 * h;
  m.intrinsics.k1 = j.contains("k1") ? require_number(j, "k1") : 0.0;
  m.aabb_scale = j.contains("aabb_scale") ? require_number(j, "aabb_scale") : 1.0;
  require(m.aabb_scale > 0, "manifest: aabb_scale must be positive");
  m.intrinsics.validate();

  if (!j.contains("frames") || !j.at("frames").is_array())
    throw ContractError("manifest: missing field 'frames'");
  std::set<std::string> seen;
  for (std::size_t i = 0; i < j.at("frames").size(); ++i) {
    const json& jf = j.at("frames")[i];
    FrameRecord record;
    if (!jf.contains("file_path"))
      throw ContractError(cat("manifest: frame ", i, " missing field 'file_path'"));
    record.file_path = jf.at("file_path").get<std::string>();
    if (!seen.insert(record.file_path).second)
      throw ContractError(cat("manifest: duplicate frame file_path '", record.file_path, "'"));
    if (!jf.contains("transform_matrix"))
      throw ContractError(cat("manifest: frame ", i, " missing field 'transform_matrix'"));
    const json& jm = jf.at("transform_matrix");
    if (!jm.is_array() || jm.size() != 4)
      throw ContractError(cat("manifest: frame ", i, " transform_matrix must be 4 rows"));
    Mat4<double> t;
    for (int r = 0; r < 4; ++r) {
      if (!jm[r].is_array() || jm[r].size() != 4)
        throw ContractError(cat("manifest: frame ", i, " transform_matrix row ", r,
                                " must hold 4 numbers"));
      for (int c = 0; c < 4; ++c) t(r, c) = jm[r][c].get<double>();
    }
    record.transform = render::Pose<double>::from_matrix(t);
    try {
      record.transform.validate(1e-4);
    } catch (const ContractError& e) {
      throw ContractError(cat("manifest: frame ", i, " ('", record.file_path,
                              "'): ", e.what()));
    }
    if (jf.contains("time")) {
      const double time = jf.at("time").get<double>();
      require(time >= 0.0 && time <= 1.0,
              cat("manifest: frame ", i, " time ", time, " outside [0,1]"));
      record.time = time;
    }
    m.frames.push_back(std::move(record));
  }
  require(!m.frames.empty(), "manifest: no frames");
  return m;
}

void write_manifest(const DatasetManifest& manifest, const std::string& path) {
  manifest.intrinsics.validate();
  json j;
  j["camera_angle_x"] = manifest.intrinsics.angle_x();
  j["fl_x"] = manifest.intrinsics.fx;
  j["fl_y"] = manifest.intrinsics.fy;
  j["cx"] = manifest.intrinsics.cx;
  j["cy"] = manifest.intrinsics.cy;
  j["w"] = manifest.intrinsics.width;
  j["h"] = manifest.intrinsics.height;
  j["k1"] = manifest.intrinsics.k1;
  j["aabb_scale"] = manifest.aabb_scale;
  j["frames"] = json::array();
  std::set<std::string> seen;
  for (const auto& f : manifest.frames) {
    require(seen.insert(f.file_path).second,
            cat("write_manifest: duplicate frame file_path '", f.file_path, "'"));
    json jf;
    jf["file_path"] = f.file_path;
    json rows = json::array();
    for (int r = 0; r < 4; ++r) {
      json row = json::array();
      for (int c = 0; c < 4; ++c) row.push_back(f.transform.camera_to_world(r, c));
      rows.push_back(row);
    }
    jf["transform_matrix"] = rows;
    if (f.time) jf["time"] = *f.time;
    j["frames"].push_back(jf);
  }
  std::ofstream out(path, std::ios::trunc);
  if (!out) throw AbortError("write_manifest: cannot open " + path);
  out << j.dump(1) << "\n";
  if (!out) throw AbortError("write_manifest: short write to " + path);
}

std::vector<img::ImageF> load_frame_images(const DatasetManifest& manifest,
                                           const std::string& manifest_path) {
  const auto base = std::filesystem::path(manifest_path).parent_path();
  std::vector<img::ImageF> images;
  images.reserve(manifest.frames.size());
  for (const auto& f : manifest.frames) {
    const auto path = (base / f.file_path).string();
    auto image = img::to_float(img::read_png(path));
    require(image.width == manifest.intrinsics.width &&
                image.height == manifest.intrinsics.height,
            cat("frame '", f.file_path, "' is ", image.width, "x", image.height,
                " but the manifest declares ", manifest.intrinsics.width, "x",
                manifest.intrinsics.height));
    images.push_back(std::move(image));
  }
  return images;
}

std::vector<std::size_t> select_frame_indices(std::size_t count, double source_rate,
                                              double target_rate) {
  require(target_rate > 0, "select_frames: target rate must be positive");
  require(source_rate >= target_rate,
          cat("select_frames: target rate ", target_rate, " exceeds source rate ",
              source_rate));
  const auto stride = static_cast<std::size_t>(std::llround(source_rate / target_rate));
  std::vector<std::size_t> kept;
  for (std::size_t i = 0; i < count; i += std::max<std::size_t>(1, stride))
    kept.push_back(i);
  return kept;
}

}  // namespace rsonerf::data
