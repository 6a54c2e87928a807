#pragma once
// Binary embedding archive: the bridge for embeddings computed by an
// external pipeline. Little-endian layout:
//
//   magic   "RTEM"            4 bytes
//   version u16               currently 1
//   K       u32               class count
//   D       u32               embedding dimension
//   count   u64               sample count
//   tags    2 x 8 bytes       "vision\0\0", "touch\0\0\0"
//   payload per sample: clean_v, clean_t, pert_v, pert_t (D f32 each),
//                       label u32
//
// Values are stored as f32 and widened to double on use, so save -> load is
// bitwise lossless on the stored data.

#include <cstdint>
#include <string>
#include <vector>

#include "reliatta/core.hpp"

namespace reliatta {

struct ArchiveSample {
    std::vector<float> clean_v;
    std::vector<float> clean_t;
    std::vector<float> pert_v;
    std::vector<float> pert_t;
    std::uint32_t label = 0;
};

struct EmbeddingArchive {
    std::uint16_t version = 1;
    std::uint32_t num_classes = 0;
    std::uint32_t dim = 0;
    std::vector<ArchiveSample> samples;

    void validate() const;
};

void save_archive(const std::string& path, const EmbeddingArchive& archive);

// Throws ParseError (with the byte offset) on bad magic, unsupported
// version, or a payload shorter than the header promises.
EmbeddingArchive load_archive(const std::string& path);

}  // namespace reliatta
