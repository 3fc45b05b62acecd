#pragma once

#include "sits/series.hpp"

#include <string>

namespace sits {

// CSV schema: header `polygon_id,label,<feature>_t<day>,...` with one column
// per (day, feature) pair in time-major order, one row per pixel sample.
// Values use the shortest round-trip decimal form; the literal token `NA`
// marks invalid observations. Labels are class names resolved against the
// legend sidecar (`<csv path>.legend` by default), which holds ordered
// `name:#RRGGBB` lines.

/// Parses a dataset CSV plus its legend sidecar. Throws DataError with the
/// offending line number on malformed headers, ragged rows, unparsable values
/// or unknown class names.
Dataset read_dataset(const std::string& csv_path, const std::string& legend_path = "");

/// Writes a dataset and its legend. The output is canonical: reading it back
/// and writing again produces byte-identical files. Throws DataError on an
/// empty dataset or I/O failure.
void write_dataset(const Dataset& dataset, const std::string& csv_path,
                   const std::string& legend_path = "");

ClassLegend read_legend(const std::string& path);
void write_legend(const ClassLegend& legend, const std::string& path);

/// Default sidecar path: `<csv path>.legend`.
std::string legend_path_for(const std::string& csv_path);

} // namespace sits
