#pragma once

#include "tlbench/records.hpp"

#include <string>

namespace tlbench {

/// Required manifest columns, in canonical write order.
/// Missing age/sex are encoded as empty strings.
extern const char* const kManifestColumns[7];

/// Parse a manifest CSV. The header must contain all seven required columns
/// (any order; extra columns are ignored). A missing column raises SchemaError
/// naming it; an unparseable value raises RowError with the 1-based data row.
DatasetManifest load_manifest(const std::string& path);

void save_manifest(const DatasetManifest& manifest, const std::string& path);

} // namespace tlbench
