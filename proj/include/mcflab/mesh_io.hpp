#pragma once

#include <filesystem>
#include <string>

#include "mcflab/trimesh.hpp"

namespace mcf {

enum class MeshFormat { OBJ, PLY };

MeshFormat format_from_path(const std::filesystem::path& path);

TriMesh load_mesh(const std::filesystem::path& path, MeshFormat format,
                  const BuildOptions& opts = {}, BuildReport* report = nullptr);
TriMesh load_mesh(const std::filesystem::path& path, const BuildOptions& opts = {},
                  BuildReport* report = nullptr);

TriMesh parse_obj(const std::string& text, const BuildOptions& opts = {},
                  BuildReport* report = nullptr);

void save_obj(const TriMesh& mesh, const std::filesystem::path& path);
std::string to_obj(const TriMesh& mesh);

}  // namespace mcf
