#pragma once

#include <filesystem>
#include <optional>
#include <string>
#include <vector>

#include "campseg/vectorize.hpp"

namespace campseg {

/// Writes base.shp, base.shx and base.dbf (fields id N10, area N19.6,
/// px_count N10), plus base.prj holding `crs_text` verbatim when present. A
/// stale .prj is removed otherwise. Zero features give valid empty files.
void write_shapefile(const std::vector<PolygonFeature>& features, const std::optional<std::string>& crs_text,
                     const std::filesystem::path& base);

}  // namespace campseg
