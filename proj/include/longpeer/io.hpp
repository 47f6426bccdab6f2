#pragma once

#include <string>
#include <vector>

#include "longpeer/dataset.hpp"

namespace longpeer::io {

// Minimal CSV support for the file formats used here: comma separated,
// no quoting, one header row where stated.
std::vector<std::vector<std::string>> read_csv(const std::string& path);

double parse_double(const std::string& field, const std::string& context);

// Doubles are written with 17 significant digits so that a write/load
// round trip is bit exact.
std::string format_double(double v);

// outcomes: subject,t,y,<covariate names...>; curves: subject,t,w_1..w_p
void write_dataset(const LongitudinalDataset& ds, const std::string& outcomes_path,
                   const std::string& curves_path);

// p rows x J columns, no header
Matrix read_basis_csv(const std::string& path);

void write_matrix_csv(const Matrix& m, const std::string& path,
                      const std::vector<std::string>& header = {});

std::string read_file(const std::string& path);
void write_file(const std::string& path, const std::string& content);

// FNV-1a content hash, hex encoded; used for output manifests.
std::string content_hash(const std::string& bytes);
std::string file_hash(const std::string& path);

}  // namespace longpeer::io
