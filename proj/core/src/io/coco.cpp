#include "detadapt/io/coco.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <set>
#include <sstream>

#include <nlohmann/json.hpp>

#include "detadapt/error.hpp"

namespace detadapt::io {

using nlohmann::json;

namespace {

[[noreturn]] void record_error(const std::string& origin, const char* section, std::size_t i, const std::string& why) {
  std::ostringstream msg;
  msg << origin << ": " << section << " record " << i << ": " << why;
  throw DataError(msg.str());
}

json parse_json(const std::string& text, const std::string& origin) {
  try {
    return json::parse(text);
  } catch (const json::parse_error& e) {
    throw DataError(origin + ": invalid JSON: " + e.what());
  }
}

// Fetches a required member of a record with the expected JSON type.
const json& member(const json& rec, const char* key, json::value_t type, const std::string& origin,
                   const char* section, std::size_t i) {
  const auto it = rec.find(key);
  if (it == rec.end()) record_error(origin, section, i, std::string("missing '") + key + "'");
  const bool ok = type == json::value_t::number_float ? it->is_number()
                  : type == json::value_t::number_integer ? it->is_number_integer()
                                                           : it->type() == type;
  if (!ok) record_error(origin, section, i, std::string("'") + key + "' has the wrong type");
  return *it;
}

AbsoluteBox read_bbox(const json& rec, const std::string& origin, const char* section, std::size_t i) {
  const json& b = member(rec, "bbox", json::value_t::array, origin, section, i);
  if (b.size() != 4 || !std::all_of(b.begin(), b.end(), [](const json& v) { return v.is_number(); }))
    record_error(origin, section, i, "bbox must be four numbers [x, y, w, h]");
  AbsoluteBox a{b[0].get<double>(), b[1].get<double>(), b[2].get<double>(), b[3].get<double>()};
  if (!(std::isfinite(a.x) && std::isfinite(a.y) && std::isfinite(a.w) && std::isfinite(a.h)))
    record_error(origin, section, i, "bbox has a non-finite value");
  if (!(a.w > 0.0 && a.h > 0.0)) record_error(origin, section, i, "degenerate bbox (w and h must be positive)");
  return a;
}

const json& top_array(const json& doc, const char* key, const std::string& origin) {
  const auto it = doc.find(key);
  if (it == doc.end()) throw DataError(origin + ": missing '" + key + "' array");
  if (!it->is_array()) throw DataError(origin + ": '" + key + "' must be an array");
  return *it;
}

}  // namespace

std::vector<ImageId> GroundTruthIndex::image_ids() const {
  std::vector<ImageId> ids;
  for (const auto& [id, info] : images) ids.push_back(id);
  return ids;
}

int GroundTruthIndex::category_index(int coco_id) const {
  const auto it = std::lower_bound(category_ids.begin(), category_ids.end(), coco_id);
  if (it == category_ids.end() || *it != coco_id) throw DataError("unknown category id " + std::to_string(coco_id));
  return static_cast<int>(it - category_ids.begin());
}

const ImageInfo& GroundTruthIndex::image(ImageId id) const {
  const auto it = images.find(id);
  if (it == images.end()) throw DataError("unknown image id " + std::to_string(id));
  return it->second;
}

std::string read_file(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw DataError(path.string() + ": cannot open file");
  std::ostringstream buf;
  buf << in.rdbuf();
  return buf.str();
}

void write_file(const std::filesystem::path& path, const std::string& text) {
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) throw DataError(path.string() + ": cannot write file");
  out << text;
  if (!out) throw DataError(path.string() + ": write failed");
}

GroundTruthIndex parse_ground_truth(const std::string& text, const std::string& origin) {
  const json doc = parse_json(text, origin);
  if (!doc.is_object()) throw DataError(origin + ": ground truth must be a JSON object");
  GroundTruthIndex index;

  const json& cats = top_array(doc, "categories", origin);
  std::vector<std::pair<int, std::string>> categories;
  for (std::size_t i = 0; i < cats.size(); ++i) {
    const json& c = cats[i];
    if (!c.is_object()) record_error(origin, "categories", i, "not an object");
    const int id = member(c, "id", json::value_t::number_integer, origin, "categories", i).get<int>();
    std::string name = std::to_string(id);
    if (c.contains("name")) name = member(c, "name", json::value_t::string, origin, "categories", i).get<std::string>();
    categories.emplace_back(id, std::move(name));
  }
  std::sort(categories.begin(), categories.end());
  for (std::size_t i = 0; i < categories.size(); ++i) {
    if (i > 0 && categories[i].first == categories[i - 1].first)
      throw DataError(origin + ": duplicate category id " + std::to_string(categories[i].first));
    index.category_ids.push_back(categories[i].first);
    index.category_names.push_back(categories[i].second);
  }

  const json& imgs = top_array(doc, "images", origin);
  for (std::size_t i = 0; i < imgs.size(); ++i) {
    const json& im = imgs[i];
    if (!im.is_object()) record_error(origin, "images", i, "not an object");
    const auto id = member(im, "id", json::value_t::number_integer, origin, "images", i).get<ImageId>();
    const int w = member(im, "width", json::value_t::number_integer, origin, "images", i).get<int>();
    const int h = member(im, "height", json::value_t::number_integer, origin, "images", i).get<int>();
    if (w <= 0 || h <= 0) record_error(origin, "images", i, "width and height must be positive");
    std::string file_name;
    if (im.contains("file_name"))
      file_name = member(im, "file_name", json::value_t::string, origin, "images", i).get<std::string>();
    if (!index.images.emplace(id, ImageInfo{{w, h}, std::move(file_name)}).second)
      record_error(origin, "images", i, "duplicate image id " + std::to_string(id));
  }

  const json& anns = doc.contains("annotations") ? top_array(doc, "annotations", origin) : json::array();
  std::set<std::int64_t> ann_ids;
  for (std::size_t i = 0; i < anns.size(); ++i) {
    const json& a = anns[i];
    if (!a.is_object()) record_error(origin, "annotations", i, "not an object");
    if (a.contains("id")) {
      const auto id = member(a, "id", json::value_t::number_integer, origin, "annotations", i).get<std::int64_t>();
      if (!ann_ids.insert(id).second) record_error(origin, "annotations", i, "duplicate annotation id " + std::to_string(id));
    }
    const auto image_id = member(a, "image_id", json::value_t::number_integer, origin, "annotations", i).get<ImageId>();
    const int cat = member(a, "category_id", json::value_t::number_integer, origin, "annotations", i).get<int>();
    const AbsoluteBox abs = read_bbox(a, origin, "annotations", i);
    const auto im = index.images.find(image_id);
    if (im == index.images.end()) record_error(origin, "annotations", i, "unknown image_id " + std::to_string(image_id));
    try {
      index.boxes.push_back({image_id, from_absolute(abs, im->second.size), index.category_index(cat)});
    } catch (const DataError& e) {
      record_error(origin, "annotations", i, e.what());
    }
  }
  return index;
}

GroundTruthIndex load_ground_truth(const std::filesystem::path& path) {
  return parse_ground_truth(read_file(path), path.string());
}

std::vector<ImageDetection> parse_detections(const std::string& text, const std::string& origin,
                                             const GroundTruthIndex& index) {
  const json doc = parse_json(text, origin);
  if (!doc.is_array()) throw DataError(origin + ": detections must be a JSON array");
  std::vector<ImageDetection> out;
  out.reserve(doc.size());
  for (std::size_t i = 0; i < doc.size(); ++i) {
    const json& r = doc[i];
    if (!r.is_object()) record_error(origin, "detection", i, "not an object");
    const auto image_id = member(r, "image_id", json::value_t::number_integer, origin, "detection", i).get<ImageId>();
    const int cat = member(r, "category_id", json::value_t::number_integer, origin, "detection", i).get<int>();
    const double score = member(r, "score", json::value_t::number_float, origin, "detection", i).get<double>();
    if (!(score >= 0.0 && score <= 1.0)) record_error(origin, "detection", i, "score must lie in [0, 1]");
    AbsoluteBox abs = read_bbox(r, origin, "detection", i);
    const auto im = index.images.find(image_id);
    if (im == index.images.end()) record_error(origin, "detection", i, "unknown image_id " + std::to_string(image_id));
    const ImageSize s = im->second.size;
    const double x0 = std::max(0.0, abs.x), y0 = std::max(0.0, abs.y);
    const double x1 = std::min<double>(s.width, abs.x + abs.w), y1 = std::min<double>(s.height, abs.y + abs.h);
    if (!(x1 > x0 && y1 > y0)) record_error(origin, "detection", i, "bbox lies outside the image");
    try {
      out.push_back({image_id, {from_absolute({x0, y0, x1 - x0, y1 - y0}, s), index.category_index(cat), score}});
    } catch (const DataError& e) {
      record_error(origin, "detection", i, e.what());
    }
  }
  return out;
}

std::vector<ImageDetection> load_detections(const std::filesystem::path& path, const GroundTruthIndex& index) {
  return parse_detections(read_file(path), path.string(), index);
}

std::string format_detections(std::span<const ImageDetection> dets, const GroundTruthIndex& index) {
  std::vector<ImageDetection> sorted(dets.begin(), dets.end());
  std::stable_sort(sorted.begin(), sorted.end(), [](const ImageDetection& a, const ImageDetection& b) {
    if (a.image_id != b.image_id) return a.image_id < b.image_id;
    return ranks_before(a.det, b.det);
  });
  json out = json::array();
  for (const ImageDetection& d : sorted) {
    const ImageInfo& im = index.image(d.image_id);
    if (d.det.category < 0 || d.det.category >= index.num_categories())
      throw DataError("detection category index " + std::to_string(d.det.category) + " is out of range");
    const AbsoluteBox a = to_absolute(d.det.box, im.size);
    out.push_back({{"image_id", d.image_id},
                   {"category_id", index.category_ids[d.det.category]},
                   {"bbox", {a.x, a.y, a.w, a.h}},
                   {"score", d.det.score}});
  }
  return out.dump(1) + "\n";
}

void save_detections(std::span<const ImageDetection> dets, const GroundTruthIndex& index,
                     const std::filesystem::path& path) {
  write_file(path, format_detections(dets, index));
}

PerImageDetections group_by_image(std::span<const ImageDetection> dets) {
  PerImageDetections out;
  for (const ImageDetection& d : dets) out[d.image_id].push_back(d.det);
  return out;
}

std::vector<ImageDetection> flatten(const PerImageDetections& per_image) {
  std::vector<ImageDetection> out;
  for (const auto& [id, dets] : per_image)
    for (const Detection& d : dets) out.push_back({id, d});
  return out;
}

std::map<ImageId, ClassPrior> load_priors(const std::filesystem::path& path, const GroundTruthIndex& index) {
  const std::string origin = path.string();
  const json doc = parse_json(read_file(path), origin);
  if (!doc.is_object()) throw DataError(origin + ": priors must map image ids to category lists");
  std::map<ImageId, ClassPrior> out;
  std::size_t i = 0;
  for (const auto& [key, cats] : doc.items()) {
    ImageId id = 0;
    std::size_t used = 0;
    try {
      id = std::stoll(key, &used);
    } catch (const std::exception&) {
      used = 0;
    }
    if (used == 0 || used != key.size()) record_error(origin, "prior", i, "key '" + key + "' is not an image id");
    if (!index.images.contains(id)) record_error(origin, "prior", i, "unknown image_id " + key);
    if (!cats.is_array()) record_error(origin, "prior", i, "categories must be an array");
    ClassPrior prior;
    prior.image_id = id;
    for (const json& c : cats) {
      if (!c.is_number_integer()) record_error(origin, "prior", i, "category ids must be integers");
      try {
        prior.categories.insert(index.category_index(c.get<int>()));
      } catch (const DataError& e) {
        record_error(origin, "prior", i, e.what());
      }
    }
    out.emplace(id, std::move(prior));
    ++i;
  }
  return out;
}

GroundTruthIndex frame_from_detections(const std::vector<std::filesystem::path>& paths) {
  std::map<ImageId, std::pair<double, double>> extent;
  std::set<int> categories;
  for (const auto& path : paths) {
    const std::string origin = path.string();
    const json doc = parse_json(read_file(path), origin);
    if (!doc.is_array()) throw DataError(origin + ": detections must be a JSON array");
    for (std::size_t i = 0; i < doc.size(); ++i) {
      const json& r = doc[i];
      if (!r.is_object()) record_error(origin, "detection", i, "not an object");
      const auto image_id = member(r, "image_id", json::value_t::number_integer, origin, "detection", i).get<ImageId>();
      categories.insert(member(r, "category_id", json::value_t::number_integer, origin, "detection", i).get<int>());
      const AbsoluteBox a = read_bbox(r, origin, "detection", i);
      auto& e = extent[image_id];
      e.first = std::max(e.first, a.x + a.w);
      e.second = std::max(e.second, a.y + a.h);
    }
  }
  GroundTruthIndex index;
  for (const auto& [id, e] : extent)
    index.images[id] = {{std::max(1, static_cast<int>(std::ceil(e.first))), std::max(1, static_cast<int>(std::ceil(e.second)))}, ""};
  for (int c : categories) {
    index.category_ids.push_back(c);
    index.category_names.push_back(std::to_string(c));
  }
  return index;
}

}  // namespace detadapt::io
