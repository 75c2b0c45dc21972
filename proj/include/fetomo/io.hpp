#pragma once

#include <filesystem>
#include <map>
#include <string>
#include <vector>

#include <json.hpp>

#include "fetomo/bayes.hpp"
#include "fetomo/diagnostics.hpp"
#include "fetomo/forward_model.hpp"
#include "fetomo/ladder.hpp"
#include "fetomo/phase_space.hpp"
#include "fetomo/spectrogram.hpp"

namespace fetomo::io {

using nlohmann::json;
namespace fs = std::filesystem;

inline constexpr const char* kFormat = "fetomo/1";

json spectrogram_to_json(const Spectrogram& s);
Spectrogram spectrogram_from_json(const json& j);

json density_to_json(const DensityMatrix& rho);
DensityMatrix density_from_json(const json& j);

json forward_params_to_json(const ForwardParams& p);
ForwardParams forward_params_from_json(const json& j);

/// MAP result bundled with the data it was computed from.
struct MapFile {
  Spectrogram data;
  EnergyWindow window;
  MapResult map;
};
json map_to_json(const MapFile& m);
MapFile map_from_json(const json& j);

json summary_to_json(const PosteriorSummary& s, const std::map<std::string, double>& rhat);

json read_json(const fs::path& path);
void write_json(const fs::path& path, const json& j);

Spectrogram read_spectrogram(const fs::path& path);
void write_spectrogram(const fs::path& path, const Spectrogram& s);
DensityMatrix read_density(const fs::path& path);
void write_density(const fs::path& path, const DensityMatrix& rho);

/// Chain header (JSON) plus sidecar payload "<stem>.bin" of little-endian
/// float64 records, one record of 2 d^2 values per stored sample.
void write_chain(const fs::path& header_path, const ChainRecord& chain);

enum class PayloadCheck {
  Strict,    // payload length must match the header exactly
  Truncate,  // drop a trailing partial record and any records past the end
};
ChainRecord read_chain(const fs::path& header_path, PayloadCheck check = PayloadCheck::Strict);

/// Every "chain_*.json" in a directory, in name order.
std::vector<ChainRecord> read_chain_dir(const fs::path& dir);

// Raw payload codec, exposed for tests.
std::string encode_payload(const std::vector<ParamVector>& samples);
std::vector<ParamVector> decode_payload(const std::string& bytes, int record_length);

void write_temporal_csv(const fs::path& path, const PositionGrid& grid, const RVector& density);
void write_wigner_csv(const fs::path& path, const WignerTable& table);

}  // namespace fetomo::io
