#pragma once

// Checkpoint layout (a directory):
//
//   manifest.txt   text, one record per line, fields separated by tabs
//                    line 1:  wmg-checkpoint<TAB>1
//                    line 2:  adam_steps<TAB><count>
//                    then:    <name><TAB><rows>x<cols><TAB><byte offset>
//   tensors.bin    little-endian IEEE-754 doubles, row-major, concatenated
//                  in manifest order
//
// Every parameter is followed by its Adam moments, stored under the reserved
// suffixes "@adam.m" and "@adam.v".

#include <cstdint>
#include <filesystem>
#include <stdexcept>
#include <string>
#include <vector>

#include "wmg/parameter_store.hpp"

namespace wmg {

class CheckpointError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

inline constexpr const char* kFirstMomentSuffix = "@adam.m";
inline constexpr const char* kSecondMomentSuffix = "@adam.v";

struct CheckpointRecord {
  std::string name;
  std::size_t rows = 0;
  std::size_t cols = 0;
  std::uint64_t offset = 0;
  std::vector<double> values;
};

struct CheckpointContents {
  std::uint64_t adam_steps = 0;
  std::vector<CheckpointRecord> records;
};

void save_parameters(const ParameterStore& store, const std::filesystem::path& dir);
/// Overwrites values and moments of `store`; names and shapes must match exactly.
void load_parameters(ParameterStore& store, const std::filesystem::path& dir);
CheckpointContents read_checkpoint(const std::filesystem::path& dir);

}  // namespace wmg
