#include <algorithm>
#include <cmath>
#include <fstream>
#include <iostream>
#include <set>
#include <unordered_map>

#include "circlesnake/data.hpp"
#include "circlesnake/error.hpp"
#include "circlesnake/image_io.hpp"
#include "json.hpp"

namespace circlesnake::data {

using nlohmann::json;
namespace fs = std::filesystem;

namespace {

json read_json(const fs::path& path) {
  std::ifstream in(path);
  if (!in) throw Error(ErrorCategory::io, "cannot open " + path.string());
  try {
    return json::parse(in);
  } catch (const json::parse_error& e) {
    throw InvalidInput("malformed JSON in " + path.string() + ": " + e.what());
  }
}

geometry::Contour polygon_from_flat(const json& flat, long long ann_id) {
  if (!flat.is_array() || flat.size() < 6 || flat.size() % 2 != 0) {
    throw InvalidInput("annotation " + std::to_string(ann_id) +
                       ": polygon needs an even list of at least 6 coordinates");
  }
  std::vector<geometry::Point> pts;
  for (std::size_t i = 0; i < flat.size(); i += 2) {
    pts.push_back({flat[i].get<double>(), flat[i + 1].get<double>()});
  }
  return geometry::Contour(std::move(pts));
}

}  // namespace

std::vector<Sample> load_coco(const fs::path& annotation_path, const fs::path& image_root,
                              CocoLoadReport* report) {
  const json doc = read_json(annotation_path);
  if (!doc.contains("images") || !doc.contains("annotations")) {
    throw InvalidInput(annotation_path.string() + ": missing 'images' or 'annotations'");
  }

  std::map<int, int> remap;
  if (doc.contains("categories") && !doc["categories"].empty()) {
    std::set<int> ids;
    for (const json& c : doc["categories"]) ids.insert(c.at("id").get<int>());
    for (int id : ids) remap.emplace(id, static_cast<int>(remap.size()));
  } else {
    std::set<int> ids;
    for (const json& a : doc["annotations"]) ids.insert(a.at("category_id").get<int>());
    for (int id : ids) remap.emplace(id, static_cast<int>(remap.size()));
  }

  struct Pending {
    std::string file_name;
    std::vector<encoding::InstanceRecord> instances;
  };
  std::vector<long long> order;
  std::unordered_map<long long, Pending> images;
  for (const json& im : doc["images"]) {
    const long long id = im.at("id").get<long long>();
    order.push_back(id);
    images[id].file_name = im.at("file_name").get<std::string>();
  }

  for (const json& a : doc["annotations"]) {
    const long long ann_id = a.value("id", -1LL);
    const long long image_id = a.at("image_id").get<long long>();
    auto it = images.find(image_id);
    if (it == images.end()) {
      throw InvalidInput("annotation " + std::to_string(ann_id) + " references unknown image id " +
                         std::to_string(image_id));
    }
    if (a.value("iscrowd", 0) != 0) continue;
    const json& seg = a.at("segmentation");
    if (seg.is_object()) {
      throw InvalidInput("annotation " + std::to_string(ann_id) +
                         ": RLE segmentation is not supported; provide polygon segmentation");
    }
    if (!seg.is_array() || seg.empty()) {
      throw InvalidInput("annotation " + std::to_string(ann_id) + ": empty segmentation");
    }
    // Single-component instances: keep the largest polygon.
    geometry::Contour boundary;
    double best_area = -1.0;
    for (const json& part : seg) {
      geometry::Contour c = polygon_from_flat(part, ann_id);
      const double area = std::abs(c.signed_area());
      if (area > best_area) {
        best_area = area;
        boundary = std::move(c);
      }
    }
    const int cat = a.at("category_id").get<int>();
    auto rc = remap.find(cat);
    if (rc == remap.end()) {
      throw InvalidInput("annotation " + std::to_string(ann_id) + " has unknown category " +
                         std::to_string(cat));
    }
    encoding::InstanceRecord rec;
    rec.class_id = rc->second;
    rec.boundary = std::move(boundary);
    if (a.contains("circle_center") && a.contains("circle_radius")) {
      rec.circle = {a["circle_center"][0].get<double>(), a["circle_center"][1].get<double>(),
                    a["circle_radius"].get<double>()};
      geometry::validate(rec.circle);
    } else {
      rec.circle = encoding::min_enclosing_circle(rec.boundary);
    }
    it->second.instances.push_back(std::move(rec));
  }

  std::vector<Sample> out;
  for (long long id : order) {
    Pending& p = images[id];
    const fs::path file = image_root / p.file_name;
    if (!fs::exists(file)) {
      std::cerr << "load_coco: skipping image " << id << " (" << file.string() << " not found)\n";
      if (report) report->skipped_missing_images.push_back(std::to_string(id));
      continue;
    }
    Sample s;
    s.id = fs::path(p.file_name).stem().string();
    s.image = io::read_png(file);
    s.instances = std::move(p.instances);
    out.push_back(std::move(s));
  }
  if (report) report->category_remap = remap;
  return out;
}

void export_coco(const std::vector<Sample>& samples, const fs::path& annotation_path,
                 const fs::path& image_dir) {
  json images = json::array();
  json annotations = json::array();
  int num_classes = 1;
  long long ann_id = 1;
  for (std::size_t i = 0; i < samples.size(); ++i) {
    const Sample& s = samples[i];
    const std::string file_name = s.id + ".png";
    io::write_png(s.image, image_dir / file_name);
    const long long image_id = static_cast<long long>(i) + 1;
    images.push_back({{"id", image_id},
                      {"file_name", file_name},
                      {"width", s.image.width},
                      {"height", s.image.height}});
    for (const auto& inst : s.instances) {
      num_classes = std::max(num_classes, inst.class_id + 1);
      json flat = json::array();
      double x0 = 1e300, y0 = 1e300, x1 = -1e300, y1 = -1e300;
      for (const auto& p : inst.boundary) {
        flat.push_back(p.x);
        flat.push_back(p.y);
        x0 = std::min(x0, p.x);
        y0 = std::min(y0, p.y);
        x1 = std::max(x1, p.x);
        y1 = std::max(y1, p.y);
      }
      annotations.push_back({{"id", ann_id++},
                             {"image_id", image_id},
                             {"category_id", inst.class_id + 1},
                             {"segmentation", json::array({flat})},
                             {"area", std::abs(inst.boundary.signed_area())},
                             {"bbox", {x0, y0, x1 - x0, y1 - y0}},
                             {"iscrowd", 0},
                             {"circle_center", {inst.circle.cx, inst.circle.cy}},
                             {"circle_radius", inst.circle.r}});
    }
  }
  json categories = json::array();
  for (int c = 0; c < num_classes; ++c) {
    categories.push_back({{"id", c + 1}, {"name", "object_" + std::to_string(c)}});
  }
  const json doc = {{"images", images}, {"annotations", annotations}, {"categories", categories}};
  if (annotation_path.has_parent_path()) fs::create_directories(annotation_path.parent_path());
  std::ofstream out(annotation_path);
  if (!out) throw Error(ErrorCategory::io, "cannot write " + annotation_path.string());
  out << doc.dump(1) << '\n';
}

}  // namespace circlesnake::data
