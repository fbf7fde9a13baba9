#pragma once

#include <gsopt/train/scene.hpp>

#include <string>

namespace gsopt {

/// Reads a JSON manifest:
///   {"cameras": [{"id", "width", "height", "fx", "fy", "cx", "cy",
///                 "world_to_camera": [16 numbers, row-major], "image": "relative/or/absolute.png"}],
///    "init_ply": "optional.ply", "train": [ids], "test": [ids]}
/// Paths are relative to the manifest's directory. Cameras are ordered by id. When "train" is
/// absent every camera not listed in "test" trains.
Scene load_scene(const std::string &manifest_path);

/// Writes `scene.json`, `images/<id>.png` and, when present, `init.ply` into `directory`.
void save_scene(const Scene &scene, const std::string &directory);

} // namespace gsopt
