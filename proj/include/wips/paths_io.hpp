#pragma once

#include <iosfwd>
#include <string>

#include "wips/particles.hpp"

namespace wips {

/// Flat binary trajectory dump, little-endian:
///   char[8] "WIPSPATH", u32 version (1), u32 flags (bit 0: Z, bit 1: X),
///   u64 N, u64 M, u64 d, f64 horizon,
///   i32 types[N],
///   f64 Z[N][M+1][d] (if flagged), f64 X[N][M+1][d] (if flagged), f64 dW[N][M][d].
void write_paths(std::ostream& out, const PathEnsemble& paths);
PathEnsemble read_paths(std::istream& in);
void save_paths(const std::string& path, const PathEnsemble& paths);
PathEnsemble load_paths(const std::string& path);

}  // namespace wips
