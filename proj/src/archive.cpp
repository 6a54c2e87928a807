#include "reliatta/archive.hpp"

#include <bit>
#include <cstring>
#include <fstream>

namespace reliatta {

namespace {

constexpr char kMagic[4] = {'R', 'T', 'E', 'M'};
constexpr std::uint16_t kVersion = 1;
constexpr char kTagVision[8] = {'v', 'i', 's', 'i', 'o', 'n', 0, 0};
constexpr char kTagTouch[8] = {'t', 'o', 'u', 'c', 'h', 0, 0, 0};

static_assert(std::endian::native == std::endian::little,
              "explicit byte swaps needed on big-endian hosts");

template <typename T>
void put(std::string& out, T value) {
    char buf[sizeof(T)];
    std::memcpy(buf, &value, sizeof(T));
    out.append(buf, sizeof(T));
}

template <typename T>
T take(const std::string& in, std::size_t& offset, const char* what) {
    if (offset + sizeof(T) > in.size()) {
        throw ParseError(std::string("archive truncated while reading ") + what +
                             ": expected " + std::to_string(offset + sizeof(T)) +
                             " bytes, file has " + std::to_string(in.size()),
                         offset);
    }
    T value;
    std::memcpy(&value, in.data() + offset, sizeof(T));
    offset += sizeof(T);
    return value;
}

}  // namespace

void EmbeddingArchive::validate() const {
    for (const ArchiveSample& s : samples) {
        if (s.clean_v.size() != dim || s.clean_t.size() != dim ||
            s.pert_v.size() != dim || s.pert_t.size() != dim) {
            throw DimensionError("archive sample embedding length != dim");
        }
        if (s.label >= num_classes) {
            throw DimensionError("archive sample label out of range");
        }
    }
}

void save_archive(const std::string& path, const EmbeddingArchive& archive) {
    archive.validate();
    std::string out;
    const std::size_t per_sample = 4 * archive.dim * sizeof(float) + sizeof(std::uint32_t);
    out.reserve(38 + archive.samples.size() * per_sample);
    out.append(kMagic, 4);
    put(out, kVersion);
    put(out, archive.num_classes);
    put(out, archive.dim);
    put(out, static_cast<std::uint64_t>(archive.samples.size()));
    out.append(kTagVision, 8);
    out.append(kTagTouch, 8);
    for (const ArchiveSample& s : archive.samples) {
        for (const auto* vec : {&s.clean_v, &s.clean_t, &s.pert_v, &s.pert_t}) {
            for (float x : *vec) put(out, x);
        }
        put(out, s.label);
    }
    std::ofstream file(path, std::ios::binary | std::ios::trunc);
    if (!file) throw std::runtime_error("cannot open for writing: " + path);
    file.write(out.data(), static_cast<std::streamsize>(out.size()));
    if (!file) throw std::runtime_error("write failed: " + path);
}

EmbeddingArchive load_archive(const std::string& path) {
    std::ifstream file(path, std::ios::binary);
    if (!file) throw std::runtime_error("cannot open for reading: " + path);
    std::string in((std::istreambuf_iterator<char>(file)),
                   std::istreambuf_iterator<char>());

    std::size_t offset = 0;
    if (in.size() < 4 || std::memcmp(in.data(), kMagic, 4) != 0) {
        throw ParseError("archive magic mismatch: expected \"RTEM\"", 0);
    }
    offset = 4;
    EmbeddingArchive archive;
    archive.version = take<std::uint16_t>(in, offset, "version");
    if (archive.version != kVersion) {
        throw ParseError("unsupported archive version " + std::to_string(archive.version),
                         4);
    }
    archive.num_classes = take<std::uint32_t>(in, offset, "class count");
    archive.dim = take<std::uint32_t>(in, offset, "dimension");
    const std::uint64_t count = take<std::uint64_t>(in, offset, "sample count");
    if (archive.num_classes < 2 || archive.dim < 1) {
        throw ParseError("archive header has degenerate K or D", 6);
    }
    for (const char* expected : {kTagVision, kTagTouch}) {
        if (offset + 8 > in.size()) {
            throw ParseError("archive truncated in modality tags", offset);
        }
        if (std::memcmp(in.data() + offset, expected, 8) != 0) {
            throw ParseError("archive modality tag mismatch", offset);
        }
        offset += 8;
    }

    const std::size_t per_sample = 4 * archive.dim * sizeof(float) + sizeof(std::uint32_t);
    const std::size_t expected_total = offset + count * per_sample;
    if (in.size() != expected_total) {
        throw ParseError("archive payload length mismatch: expected " +
                             std::to_string(expected_total) + " bytes, file has " +
                             std::to_string(in.size()),
                         offset);
    }

    archive.samples.resize(count);
    for (std::uint64_t i = 0; i < count; ++i) {
        ArchiveSample& s = archive.samples[i];
        for (auto* vec : {&s.clean_v, &s.clean_t, &s.pert_v, &s.pert_t}) {
            vec->resize(archive.dim);
            for (std::uint32_t d = 0; d < archive.dim; ++d) {
                (*vec)[d] = take<float>(in, offset, "embedding payload");
            }
        }
        s.label = take<std::uint32_t>(in, offset, "sample label");
    }
    archive.validate();
    return archive;
}

}  // namespace reliatta
