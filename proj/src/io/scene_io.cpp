#include <gsopt/core/errors.hpp>
#include <gsopt/io/image_io.hpp>
#include <gsopt/io/ply.hpp>
#include <gsopt/io/scene_io.hpp>

#include <json.hpp>

#include <algorithm>
#include <filesystem>
#include <fstream>
#include <map>
#include <set>

namespace gsopt {

namespace fs = std::filesystem;
using nlohmann::json;

namespace {

template <typename T>
T field(const json &obj, const char *key, const std::string &where) {
    if (!obj.contains(key)) {
        throw FormatError(where + ": missing field '" + key + "'");
    }
    try {
        return obj.at(key).get<T>();
    } catch (const json::exception &) {
        throw FormatError(where + ": field '" + key + "' has the wrong type");
    }
}

std::string resolve(const fs::path &base, const std::string &p) {
    const fs::path path(p);
    return (path.is_absolute() ? path : base / path).string();
}

} // namespace

Scene load_scene(const std::string &manifest_path) {
    std::ifstream in(manifest_path);
    if (!in) {
        throw FormatError("cannot open scene manifest '" + manifest_path + "'");
    }
    json doc;
    try {
        doc = json::parse(in);
    } catch (const json::parse_error &e) {
        throw FormatError("scene manifest '" + manifest_path + "': " + e.what());
    }
    const fs::path base = fs::path(manifest_path).parent_path();
    if (!doc.contains("cameras") || !doc["cameras"].is_array()) {
        throw FormatError("scene manifest '" + manifest_path + "': missing 'cameras' array");
    }

    Scene scene;
    scene.images_quantized = true;
    for (const json &rec : doc["cameras"]) {
        Camera cam;
        const std::string where = "scene manifest camera";
        cam.id = field<int>(rec, "id", where);
        const std::string cw = where + " " + std::to_string(cam.id);
        cam.width = field<int>(rec, "width", cw);
        cam.height = field<int>(rec, "height", cw);
        cam.fx = field<double>(rec, "fx", cw);
        cam.fy = field<double>(rec, "fy", cw);
        cam.cx = field<double>(rec, "cx", cw);
        cam.cy = field<double>(rec, "cy", cw);
        const auto m = field<std::vector<double>>(rec, "world_to_camera", cw);
        if (m.size() != 16) {
            throw FormatError(cw + ": world_to_camera must have 16 entries");
        }
        Mat4 w2c;
        for (int r = 0; r < 4; ++r) {
            for (int c = 0; c < 4; ++c) {
                w2c(r, c) = m[4 * r + c];
            }
        }
        cam.set_world_to_camera(w2c);
        const std::string image_path = resolve(base, field<std::string>(rec, "image", cw));
        cam.gt_image = load_png(image_path);
        if (cam.gt_image.width() != cam.width || cam.gt_image.height() != cam.height) {
            throw FormatError(cw + ": image '" + image_path + "' is " + std::to_string(cam.gt_image.width()) + "x" +
                              std::to_string(cam.gt_image.height()) + ", expected " + std::to_string(cam.width) +
                              "x" + std::to_string(cam.height));
        }
        scene.cameras.push_back(std::move(cam));
    }
    std::sort(scene.cameras.begin(), scene.cameras.end(), [](const Camera &a, const Camera &b) { return a.id < b.id; });
    std::map<int, std::size_t> by_id;
    for (std::size_t i = 0; i < scene.cameras.size(); ++i) {
        if (!by_id.emplace(scene.cameras[i].id, i).second) {
            throw FormatError("scene manifest: duplicate camera id " + std::to_string(scene.cameras[i].id));
        }
    }

    auto id_list = [&](const char *key) {
        std::vector<std::size_t> out;
        for (const int id : field<std::vector<int>>(doc, key, "scene manifest")) {
            const auto it = by_id.find(id);
            if (it == by_id.end()) {
                throw FormatError(std::string("scene manifest: '") + key + "' lists unknown camera id " +
                                  std::to_string(id));
            }
            out.push_back(it->second);
        }
        std::sort(out.begin(), out.end());
        return out;
    };
    if (doc.contains("test")) {
        scene.test = id_list("test");
    }
    if (doc.contains("train")) {
        scene.train = id_list("train");
    } else {
        const std::set<std::size_t> test(scene.test.begin(), scene.test.end());
        for (std::size_t i = 0; i < scene.cameras.size(); ++i) {
            if (!test.count(i)) {
                scene.train.push_back(i);
            }
        }
    }
    for (const std::size_t i : scene.train) {
        if (std::binary_search(scene.test.begin(), scene.test.end(), i)) {
            throw FormatError("scene manifest: camera id " + std::to_string(scene.cameras[i].id) +
                              " is in both train and test");
        }
    }
    if (doc.contains("init_ply") && !doc["init_ply"].is_null()) {
        scene.initial = load_ply(resolve(base, field<std::string>(doc, "init_ply", "scene manifest")));
    }
    return scene;
}

void save_scene(const Scene &scene, const std::string &directory) {
    const fs::path dir(directory);
    fs::create_directories(dir / "images");
    json doc;
    doc["cameras"] = json::array();
    for (const Camera &cam : scene.cameras) {
        const std::string rel = "images/" + std::to_string(cam.id) + ".png";
        save_png(cam.gt_image, (dir / rel).string());
        const Mat4 w2c = cam.world_to_camera();
        std::vector<double> m(16);
        for (int r = 0; r < 4; ++r) {
            for (int c = 0; c < 4; ++c) {
                m[4 * r + c] = w2c(r, c);
            }
        }
        doc["cameras"].push_back({{"id", cam.id},
                                  {"width", cam.width},
                                  {"height", cam.height},
                                  {"fx", cam.fx},
                                  {"fy", cam.fy},
                                  {"cx", cam.cx},
                                  {"cy", cam.cy},
                                  {"world_to_camera", m},
                                  {"image", rel}});
    }
    auto ids = [&](const std::vector<std::size_t> &list) {
        std::vector<int> out;
        for (const std::size_t i : list) {
            out.push_back(scene.cameras.at(i).id);
        }
        return out;
    };
    doc["train"] = ids(scene.train);
    doc["test"] = ids(scene.test);
    if (scene.initial) {
        save_ply(*scene.initial, (dir / "init.ply").string());
        doc["init_ply"] = "init.ply";
    }
    std::ofstream out(dir / "scene.json");
    out << doc.dump(2) << '\n';
    if (!out) {
        throw FormatError("failed writing scene manifest in '" + directory + "'");
    }
}

} // namespace gsopt
