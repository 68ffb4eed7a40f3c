#pragma once

#include <algorithm>
#include <array>
#include <charconv>
#include <cstdint>
#include <filesystem>
#include <fstream>
#include <map>
#include <numeric>
#include <optional>
#include <random>
#include <set>
#include <sstream>
#include <string>
#include <unordered_map>
#include <vector>

#include <json.hpp>

#include "agaze/types.hpp"

// Fixation logs, stimulus metadata, and dataset partitioning.
//
// Fixation CSV schema:
//   observer_id,group,image_id,index,x,y,duration_ms
// group in {children,adults,elderly}; x,y are 0-based pixel indices
// (x = column, y = row); UTF-8, comma-separated, LF line endings.
//
// Dataset manifest: JSON listing images (id, category, dimensions, paths)
// and observers; paths are relative to the manifest's directory.

namespace agaze {

struct FixationRecord {
    std::string observer_id;
    AgeGroup group = AgeGroup::Adults;
    std::string image_id;
    int index = 0;  // ordinal within trial
    int x = 0;
    int y = 0;
    double duration_ms = 0.0;

    bool operator==(const FixationRecord&) const = default;
};

struct ImageInfo {
    std::string id;
    StimulusCategory category = StimulusCategory::Naturals;
    int width = 0;
    int height = 0;
    std::filesystem::path raster_path;
    std::optional<std::filesystem::path> depth_path;
    std::optional<std::filesystem::path> mask_path;
};

struct ObserverInfo {
    std::string id;
    AgeGroup group = AgeGroup::Adults;
};

// Immutable after construction; all operations below are pure.
struct GazeDataset {
    std::vector<ImageInfo> images;
    std::vector<ObserverInfo> observers;
    std::vector<FixationRecord> fixations;

    const ImageInfo* find_image(const std::string& id) const {
        for (const auto& im : images)
            if (im.id == id) return &im;
        return nullptr;
    }

    const ImageInfo& image(const std::string& id) const {
        const ImageInfo* im = find_image(id);
        if (!im) throw ReferenceError("unknown image_id '" + id + "'");
        return *im;
    }

    const ObserverInfo* find_observer(const std::string& id) const {
        for (const auto& ob : observers)
            if (ob.id == id) return &ob;
        return nullptr;
    }

    std::vector<const FixationRecord*> fixations_for_image(const std::string& image_id) const {
        std::vector<const FixationRecord*> out;
        for (const auto& f : fixations)
            if (f.image_id == image_id) out.push_back(&f);
        return out;
    }

    std::vector<std::string> observer_ids_in_group(AgeGroup g) const {
        std::vector<std::string> out;
        for (const auto& ob : observers)
            if (ob.group == g) out.push_back(ob.id);
        std::sort(out.begin(), out.end());
        return out;
    }

    std::vector<std::string> image_ids(std::optional<StimulusCategory> cat = std::nullopt) const {
        std::vector<std::string> out;
        for (const auto& im : images)
            if (!cat || im.category == *cat) out.push_back(im.id);
        return out;
    }
};

namespace detail {

inline std::vector<std::string> split_csv_line(const std::string& line) {
    std::vector<std::string> out;
    std::string field;
    for (char c : line) {
        if (c == ',') {
            out.push_back(field);
            field.clear();
        } else if (c != '\r') {
            field += c;
        }
    }
    out.push_back(field);
    return out;
}

inline int parse_int_field(const std::string& s, const char* name, std::size_t line_no) {
    int v = 0;
    const auto res = std::from_chars(s.data(), s.data() + s.size(), v);
    if (res.ec != std::errc() || res.ptr != s.data() + s.size())
        throw ParseError("line " + std::to_string(line_no) + ": bad " + name + " value '" + s +
                         "'");
    return v;
}

inline double parse_double_field(const std::string& s, const char* name, std::size_t line_no) {
    try {
        std::size_t pos = 0;
        const double v = std::stod(s, &pos);
        if (pos != s.size()) throw std::invalid_argument(s);
        return v;
    } catch (const std::exception&) {
        throw ParseError("line " + std::to_string(line_no) + ": bad " + name + " value '" + s +
                         "'");
    }
}

// Shortest round-trip decimal representation.
inline std::string format_double(double v) {
    char buf[64];
    const auto res = std::to_chars(buf, buf + sizeof buf, v);
    return std::string(buf, res.ptr);
}

inline constexpr const char* kFixationCsvHeader = "observer_id,group,image_id,index,x,y,duration_ms";

}  // namespace detail

// Appends the validated records of a fixation CSV to `dataset`. Ordering is
// preserved. Coordinates outside the referenced image are rejected, not
// clamped. Observers seen in the CSV are registered on first use; a group
// conflict with an already known observer is a validation error.
inline GazeDataset parse_fixation_csv_stream(std::istream& in, const std::string& origin,
                                           GazeDataset dataset) {
    std::string line;
    if (!std::getline(in, line)) throw ParseError(origin + ": missing header row");
    if (!line.empty() && line.back() == '\r') line.pop_back();
    if (line != detail::kFixationCsvHeader)
        throw ParseError(origin + ": unexpected header '" + line + "'");

    std::set<std::tuple<std::string, std::string, int>> seen;
    for (const auto& f : dataset.fixations) seen.insert({f.observer_id, f.image_id, f.index});

    std::size_t line_no = 1;
    while (std::getline(in, line)) {
        ++line_no;
        if (!line.empty() && line.back() == '\r') line.pop_back();
        if (line.empty()) continue;
        const auto fields = detail::split_csv_line(line);
        if (fields.size() != 7)
            throw ParseError(origin + ": line " + std::to_string(line_no) + ": expected 7 fields, got " +
                             std::to_string(fields.size()));

        FixationRecord rec;
        rec.observer_id = fields[0];
        rec.group = parse_age_group(fields[1]);
        rec.image_id = fields[2];
        rec.index = detail::parse_int_field(fields[3], "index", line_no);
        rec.x = detail::parse_int_field(fields[4], "x", line_no);
        rec.y = detail::parse_int_field(fields[5], "y", line_no);
        rec.duration_ms = detail::parse_double_field(fields[6], "duration_ms", line_no);

        const ImageInfo* im = dataset.find_image(rec.image_id);
        if (!im)
            throw ReferenceError(origin + ": line " + std::to_string(line_no) +
                                 ": unknown image_id '" + rec.image_id + "'");
        if (rec.x < 0 || rec.x >= im->width || rec.y < 0 || rec.y >= im->height)
            throw ValidationError(origin + ": line " + std::to_string(line_no) + ": fixation (" +
                                  std::to_string(rec.x) + "," + std::to_string(rec.y) +
                                  ") outside image '" + rec.image_id + "' (" +
                                  std::to_string(im->width) + "x" + std::to_string(im->height) +
                                  ")");
        if (rec.duration_ms < 0.0)
            throw ValidationError(origin + ": line " + std::to_string(line_no) +
                                  ": negative duration for observer '" + rec.observer_id + "'");

        const ObserverInfo* ob = dataset.find_observer(rec.observer_id);
        if (ob) {
            if (ob->group != rec.group)
                throw ValidationError(origin + ": line " + std::to_string(line_no) +
                                      ": observer '" + rec.observer_id + "' listed as " +
                                      to_string(ob->group) + " but row says " +
                                      to_string(rec.group));
        } else {
            dataset.observers.push_back({rec.observer_id, rec.group});
        }

        auto key = std::make_tuple(rec.observer_id, rec.image_id, rec.index);
        if (!seen.insert(key).second)
            throw ValidationError(origin + ": line " + std::to_string(line_no) +
                                  ": duplicate (observer,image,index) triple (" + rec.observer_id +
                                  "," + rec.image_id + "," + std::to_string(rec.index) + ")");

        dataset.fixations.push_back(std::move(rec));
    }
    return dataset;
}

inline GazeDataset parse_fixation_csv(const std::filesystem::path& path, GazeDataset dataset) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw IoError("cannot open '" + path.string() + "'");
    return parse_fixation_csv_stream(in, path.filename().string(), std::move(dataset));
}

inline void serialize_fixation_csv(std::ostream& out, const std::vector<FixationRecord>& recs) {
    out << detail::kFixationCsvHeader << "\n";
    for (const auto& f : recs) {
        out << f.observer_id << ',' << to_string(f.group) << ',' << f.image_id << ',' << f.index
            << ',' << f.x << ',' << f.y << ',' << detail::format_double(f.duration_ms) << "\n";
    }
}

inline void write_fixation_csv(const std::filesystem::path& path,
                               const std::vector<FixationRecord>& recs) {
    std::ofstream out(path, std::ios::binary);
    if (!out) throw IoError("cannot open '" + path.string() + "' for writing");
    serialize_fixation_csv(out, recs);
}

// Splits one image's fixations into the three age-group lists. The lists are
// disjoint and their union is exactly the image's fixation set; per-group
// ordering follows dataset order.
inline std::array<std::vector<FixationRecord>, 3> partition_by_group(const GazeDataset& dataset,
                                                                     const std::string& image_id) {
    dataset.image(image_id);  // reference check
    std::array<std::vector<FixationRecord>, 3> out;
    for (const auto& f : dataset.fixations)
        if (f.image_id == image_id) out[index_of(f.group)].push_back(f);
    return out;
}

// Deterministic stratified train/test split over images. Per-category train
// quotas come from largest-remainder apportionment of n_train, so category
// proportions are preserved within one image.
inline std::pair<GazeDataset, GazeDataset> split_train_test(const GazeDataset& dataset,
                                                            int n_train, std::uint64_t seed) {
    const int n_images = static_cast<int>(dataset.images.size());
    if (n_train < 0 || n_train >= n_images)
        throw ArgumentError("split_train_test: n_train must be in [0, image count)");

    std::array<std::vector<int>, 3> by_cat;  // indices into dataset.images
    for (int i = 0; i < n_images; ++i) by_cat[index_of(dataset.images[i].category)].push_back(i);

    std::array<int, 3> quota{};
    std::array<double, 3> frac{};
    int assigned = 0;
    for (int c = 0; c < 3; ++c) {
        const double exact = static_cast<double>(n_train) * by_cat[c].size() / n_images;
        quota[c] = static_cast<int>(exact);
        frac[c] = exact - quota[c];
        assigned += quota[c];
    }
    std::array<int, 3> order{0, 1, 2};
    std::sort(order.begin(), order.end(), [&](int a, int b) {
        if (frac[a] != frac[b]) return frac[a] > frac[b];
        return a < b;
    });
    for (int k = 0; assigned < n_train; ++k) {
        const int c = order[k % 3];
        if (quota[c] < static_cast<int>(by_cat[c].size())) {
            ++quota[c];
            ++assigned;
        }
    }

    std::set<int> train_idx;
    for (int c = 0; c < 3; ++c) {
        auto idx = by_cat[c];
        std::mt19937_64 rng(derive_seed(seed, static_cast<std::uint64_t>(c) + 101));
        std::shuffle(idx.begin(), idx.end(), rng);
        for (int k = 0; k < quota[c]; ++k) train_idx.insert(idx[k]);
    }

    GazeDataset train, test;
    std::set<std::string> train_ids;
    for (int i = 0; i < n_images; ++i) {
        if (train_idx.count(i)) {
            train.images.push_back(dataset.images[i]);
            train_ids.insert(dataset.images[i].id);
        } else {
            test.images.push_back(dataset.images[i]);
        }
    }
    train.observers = dataset.observers;
    test.observers = dataset.observers;
    for (const auto& f : dataset.fixations)
        (train_ids.count(f.image_id) ? train : test).fixations.push_back(f);
    return {std::move(train), std::move(test)};
}

// ---------------------------------------------------------------------------
// Manifest I/O.
// ---------------------------------------------------------------------------

inline GazeDataset load_manifest(const std::filesystem::path& manifest_path) {
    std::ifstream in(manifest_path);
    if (!in) throw IoError("cannot open manifest '" + manifest_path.string() + "'");
    nlohmann::json j;
    try {
        in >> j;
    } catch (const nlohmann::json::exception& e) {
        throw ParseError("manifest '" + manifest_path.string() + "': " + e.what());
    }

    const auto base = manifest_path.parent_path();
    GazeDataset ds;
    for (const auto& ji : j.at("images")) {
        ImageInfo im;
        im.id = ji.at("id").get<std::string>();
        im.category = parse_category(ji.at("category").get<std::string>());
        im.width = ji.at("width").get<int>();
        im.height = ji.at("height").get<int>();
        if (im.width <= 0 || im.height <= 0)
            throw ValidationError("image '" + im.id + "' has non-positive dimensions");
        const auto resolve = [&](const std::string& p) { return base / p; };
        const std::string raster = ji.at("path").get<std::string>();
        if (raster.empty()) throw ValidationError("image '" + im.id + "' has an empty path");
        im.raster_path = resolve(raster);
        if (ji.contains("depth_path") && !ji.at("depth_path").get<std::string>().empty())
            im.depth_path = resolve(ji.at("depth_path").get<std::string>());
        if (ji.contains("mask_path") && !ji.at("mask_path").get<std::string>().empty())
            im.mask_path = resolve(ji.at("mask_path").get<std::string>());
        for (const auto& other : ds.images)
            if (other.id == im.id) throw ValidationError("duplicate image id '" + im.id + "'");
        ds.images.push_back(std::move(im));
    }
    if (j.contains("observers")) {
        for (const auto& jo : j.at("observers")) {
            ObserverInfo ob{jo.at("id").get<std::string>(),
                            parse_age_group(jo.at("group").get<std::string>())};
            for (const auto& other : ds.observers)
                if (other.id == ob.id) throw ValidationError("duplicate observer id '" + ob.id + "'");
            ds.observers.push_back(std::move(ob));
        }
    }
    if (j.contains("fixations_csv")) {
        ds = parse_fixation_csv(base / j.at("fixations_csv").get<std::string>(), std::move(ds));
    }
    return ds;
}

inline nlohmann::json manifest_json(const GazeDataset& ds, const std::filesystem::path& base,
                                    const std::string& fixations_csv = "") {
    // already-relative paths are written verbatim; absolute ones are
    // relativized against the manifest location when possible
    const auto portable = [&](const std::filesystem::path& p) {
        if (p.is_relative()) return p.generic_string();
        std::error_code ec;
        const auto rel = std::filesystem::relative(p, base, ec);
        if (ec || rel.empty()) return p.generic_string();
        return rel.generic_string();
    };
    nlohmann::json j;
    j["images"] = nlohmann::json::array();
    for (const auto& im : ds.images) {
        nlohmann::json ji;
        ji["id"] = im.id;
        ji["category"] = to_string(im.category);
        ji["width"] = im.width;
        ji["height"] = im.height;
        ji["path"] = portable(im.raster_path);
        if (im.depth_path) ji["depth_path"] = portable(*im.depth_path);
        if (im.mask_path) ji["mask_path"] = portable(*im.mask_path);
        j["images"].push_back(std::move(ji));
    }
    j["observers"] = nlohmann::json::array();
    for (const auto& ob : ds.observers)
        j["observers"].push_back({{"id", ob.id}, {"group", to_string(ob.group)}});
    if (!fixations_csv.empty()) j["fixations_csv"] = fixations_csv;
    return j;
}

inline void save_manifest(const std::filesystem::path& manifest_path, const GazeDataset& ds,
                          const std::string& fixations_csv = "") {
    std::ofstream out(manifest_path, std::ios::binary);
    if (!out) throw IoError("cannot open '" + manifest_path.string() + "' for writing");
    out << manifest_json(ds, manifest_path.parent_path(), fixations_csv).dump(2) << "\n";
}

}  // namespace agaze
