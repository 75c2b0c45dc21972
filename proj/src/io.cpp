#include "fetomo/io.hpp"

#include <algorithm>
#include <bit>
#include <cmath>
#include <cstdint>
#include <fstream>
#include <sstream>

#include "fetomo/error.hpp"

namespace fetomo::io {

namespace {

const json& require(const json& j, const char* key) {
  if (!j.is_object()) throw ParseError("expected a JSON object");
  const auto it = j.find(key);
  if (it == j.end()) throw ParseError(std::string("missing key '") + key + "'");
  return *it;
}

double number(const json& j, const char* key) {
  const json& v = require(j, key);
  if (!v.is_number()) throw ParseError(std::string("key '") + key + "' is not a number");
  const double x = v.get<double>();
  if (!std::isfinite(x)) throw ParseError(std::string("key '") + key + "' is not finite");
  return x;
}

std::int64_t integer(const json& j, const char* key) {
  const json& v = require(j, key);
  if (!v.is_number_integer()) throw ParseError(std::string("key '") + key + "' is not an integer");
  return v.get<std::int64_t>();
}

void check_format(const json& j) {
  const json& f = require(j, "format");
  if (!f.is_string() || f.get<std::string>() != kFormat) {
    throw ParseError(std::string("key 'format' must be \"") + kFormat + "\"");
  }
}

std::vector<double> number_array(const json& v, const char* key) {
  if (!v.is_array()) throw ParseError(std::string("key '") + key + "' is not an array");
  std::vector<double> out;
  out.reserve(v.size());
  for (const auto& e : v) {
    if (!e.is_number()) throw ParseError(std::string("key '") + key + "' has a non-numeric entry");
    const double x = e.get<double>();
    if (!std::isfinite(x)) throw ParseError(std::string("key '") + key + "' has a non-finite entry");
    out.push_back(x);
  }
  return out;
}

RMatrix number_matrix(const json& j, const char* key, Eigen::Index rows, Eigen::Index cols) {
  const json& v = require(j, key);
  if (!v.is_array() || static_cast<Eigen::Index>(v.size()) != rows) {
    throw ParseError(std::string("key '") + key + "' must have " + std::to_string(rows) + " rows");
  }
  RMatrix m(rows, cols);
  for (Eigen::Index r = 0; r < rows; ++r) {
    const auto row = number_array(v[r], key);
    if (static_cast<Eigen::Index>(row.size()) != cols) {
      throw ParseError(std::string("key '") + key + "' row " + std::to_string(r) + " must have " +
                       std::to_string(cols) + " entries");
    }
    for (Eigen::Index c = 0; c < cols; ++c) m(r, c) = row[c];
  }
  return m;
}

json matrix_json(const RMatrix& m) {
  json rows = json::array();
  for (Eigen::Index r = 0; r < m.rows(); ++r) {
    json row = json::array();
    for (Eigen::Index c = 0; c < m.cols(); ++c) row.push_back(m(r, c));
    rows.push_back(std::move(row));
  }
  return rows;
}

EnergyWindow window_from(const json& j) {
  const auto n_min = integer(j, "n_min");
  const auto n_max = integer(j, "n_max");
  try {
    return {static_cast<int>(n_min), static_cast<int>(n_max)};
  } catch (const InvalidArgument& e) {
    throw ParseError(std::string("keys 'n_min'/'n_max': ") + e.what());
  }
}

template <class F>
auto rethrow_as_parse(const char* what, F&& f) {
  try {
    return f();
  } catch (const ParseError&) {
    throw;
  } catch (const Error& e) {
    throw ParseError(std::string(what) + ": " + e.what());
  }
}

std::string read_file(const fs::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw ParseError("cannot open " + path.string());
  std::ostringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

fs::path payload_path(const fs::path& header_path) {
  fs::path p = header_path;
  p.replace_extension(".bin");
  return p;
}

}  // namespace

json spectrogram_to_json(const Spectrogram& s) {
  json j;
  j["format"] = kFormat;
  j["g_abs"] = s.coupling_magnitude;
  j["phases"] = std::vector<double>(s.phases.values().begin(), s.phases.values().end());
  j["n_min"] = s.window.n_min();
  j["n_max"] = s.window.n_max();
  j["counts"] = matrix_json(s.counts);
  if (s.total_per_phase) j["total_per_phase"] = *s.total_per_phase;
  return j;
}

Spectrogram spectrogram_from_json(const json& j) {
  check_format(j);
  const double g_abs = number(j, "g_abs");
  if (g_abs < 0.0) throw ParseError("key 'g_abs' must be non-negative");
  const auto phases = number_array(require(j, "phases"), "phases");
  const EnergyWindow window = window_from(j);
  const RMatrix counts = number_matrix(j, "counts", static_cast<Eigen::Index>(phases.size()), window.dim());
  if ((counts.array() < 0.0).any()) throw ParseError("key 'counts' has a negative entry");
  std::optional<double> total;
  if (j.contains("total_per_phase")) {
    total = number(j, "total_per_phase");
    if (!(*total > 0.0)) throw ParseError("key 'total_per_phase' must be positive");
  }
  PhaseGrid grid = rethrow_as_parse("key 'phases'", [&] { return PhaseGrid(phases); });
  return rethrow_as_parse("spectrogram", [&] {
    return Spectrogram(window, std::move(grid), counts, g_abs, total);
  });
}

json density_to_json(const DensityMatrix& rho) {
  json j;
  j["format"] = kFormat;
  j["n_min"] = rho.window().n_min();
  j["n_max"] = rho.window().n_max();
  j["re"] = matrix_json(rho.matrix().real());
  j["im"] = matrix_json(rho.matrix().imag());
  return j;
}

DensityMatrix density_from_json(const json& j) {
  check_format(j);
  const EnergyWindow window = window_from(j);
  const RMatrix re = number_matrix(j, "re", window.dim(), window.dim());
  const RMatrix im = number_matrix(j, "im", window.dim(), window.dim());
  if ((re - re.transpose()).cwiseAbs().maxCoeff() > 1e-9) throw ParseError("key 're' is not symmetric");
  if ((im + im.transpose()).cwiseAbs().maxCoeff() > 1e-9) throw ParseError("key 'im' is not antisymmetric");
  if (std::abs(re.trace() - 1.0) > 1e-8) throw ParseError("key 're' does not have unit trace");
  CMatrix m(window.dim(), window.dim());
  m.real() = re;
  m.imag() = im;
  // The file tolerances are looser than the in-memory invariants; project the
  // small residue away when the stored matrix is only nearly physical.
  try {
    return DensityMatrix(window, m);
  } catch (const InvalidArgument&) {
    Eigen::SelfAdjointEigenSolver<CMatrix> eig(0.5 * (m + m.adjoint()), Eigen::EigenvaluesOnly);
    if (eig.eigenvalues().minCoeff() < -1e-8) throw ParseError("density matrix is not positive semi-definite");
    return project_physical(ComplexMatrix(window, m));
  }
}

json forward_params_to_json(const ForwardParams& p) {
  json j;
  j["format"] = kFormat;
  j["g_lo"] = p.g_lo;
  j["g_hi"] = p.g_hi;
  j["chirp"] = p.chirp;
  j["phase_noise"] = p.phase_noise;
  return j;
}

ForwardParams forward_params_from_json(const json& j) {
  check_format(j);
  ForwardParams p{number(j, "g_lo"), number(j, "g_hi"), number(j, "chirp"), number(j, "phase_noise")};
  rethrow_as_parse("forward parameters", [&] {
    p.validate();
    return 0;
  });
  return p;
}

json map_to_json(const MapFile& m) {
  json j;
  j["format"] = kFormat;
  j["n_min"] = m.window.n_min();
  j["n_max"] = m.window.n_max();
  j["x_map"] = std::vector<double>(m.map.x_map.data(), m.map.x_map.data() + m.map.x_map.size());
  j["hessian"] = matrix_json(m.map.curvature.hessian);
  j["log_posterior"] = m.map.log_posterior_at_map;
  j["converged"] = m.map.converged;
  j["steps"] = m.map.steps;
  j["gradient_norm"] = m.map.gradient_norm;
  j["spectrogram"] = spectrogram_to_json(m.data);
  return j;
}

MapFile map_from_json(const json& j) {
  check_format(j);
  const EnergyWindow window = window_from(j);
  const auto x = number_array(require(j, "x_map"), "x_map");
  const auto n = static_cast<Eigen::Index>(param_dimension(window.dim()));
  if (static_cast<Eigen::Index>(x.size()) != n) throw ParseError("key 'x_map' has the wrong length");
  MapResult map;
  map.x_map = Eigen::Map<const RVector>(x.data(), n);
  const RMatrix h = number_matrix(j, "hessian", n, n);
  map.curvature = rethrow_as_parse("key 'hessian'", [&] { return Curvature::from(h); });
  map.log_posterior_at_map = number(j, "log_posterior");
  if (j.contains("converged") && j["converged"].is_boolean()) map.converged = j["converged"].get<bool>();
  if (j.contains("steps") && j["steps"].is_number_integer()) map.steps = j["steps"].get<int>();
  Spectrogram data = spectrogram_from_json(require(j, "spectrogram"));
  return {std::move(data), window, std::move(map)};
}

json summary_to_json(const PosteriorSummary& s, const std::map<std::string, double>& rhat) {
  json j = density_to_json(s.mean_density);
  j["std_re"] = matrix_json(s.std_real);
  j["std_im"] = matrix_json(s.std_imag);
  j["retained"] = s.retained;
  json scalars = json::object();
  for (const auto& [name, chains] : s.scalar_traces) {
    double sum = 0.0, sq = 0.0;
    std::size_t n = 0;
    for (const auto& c : chains) {
      for (double v : c) {
        sum += v;
        sq += v * v;
        ++n;
      }
    }
    const double mean = n ? sum / n : 0.0;
    scalars[name] = {{"mean", mean}, {"std", n ? std::sqrt(std::max(0.0, sq / n - mean * mean)) : 0.0}};
  }
  j["scalars"] = scalars;
  j["rhat"] = rhat;
  return j;
}

json read_json(const fs::path& path) {
  const std::string text = read_file(path);
  try {
    return json::parse(text);
  } catch (const json::parse_error& e) {
    throw ParseError(path.string() + ": " + e.what());
  }
}

void write_json(const fs::path& path, const json& j) {
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) throw Error("cannot write " + path.string());
  out << j.dump(2) << '\n';
}

Spectrogram read_spectrogram(const fs::path& path) { return spectrogram_from_json(read_json(path)); }
void write_spectrogram(const fs::path& path, const Spectrogram& s) { write_json(path, spectrogram_to_json(s)); }
DensityMatrix read_density(const fs::path& path) { return density_from_json(read_json(path)); }
void write_density(const fs::path& path, const DensityMatrix& rho) { write_json(path, density_to_json(rho)); }

std::string encode_payload(const std::vector<ParamVector>& samples) {
  std::string out;
  for (const auto& s : samples) {
    for (Eigen::Index i = 0; i < s.size(); ++i) {
      const auto bits = std::bit_cast<std::uint64_t>(s[i]);
      for (int b = 0; b < 8; ++b) out.push_back(static_cast<char>((bits >> (8 * b)) & 0xFFu));
    }
  }
  return out;
}

std::vector<ParamVector> decode_payload(const std::string& bytes, int record_length) {
  const std::size_t record_bytes = 8 * static_cast<std::size_t>(record_length);
  const std::size_t n = bytes.size() / record_bytes;
  std::vector<ParamVector> out(n, ParamVector(record_length));
  for (std::size_t r = 0; r < n; ++r) {
    for (int i = 0; i < record_length; ++i) {
      std::uint64_t bits = 0;
      const std::size_t base = r * record_bytes + 8 * static_cast<std::size_t>(i);
      for (int b = 0; b < 8; ++b) {
        bits |= static_cast<std::uint64_t>(static_cast<unsigned char>(bytes[base + b])) << (8 * b);
      }
      out[r][i] = std::bit_cast<double>(bits);
    }
  }
  return out;
}

void write_chain(const fs::path& header_path, const ChainRecord& chain) {
  if (chain.samples.empty()) throw InvalidArgument("chain has no samples");
  const auto n = chain.samples.front().size();
  const int d = static_cast<int>(std::lround(std::sqrt(n / 2.0)));
  if (param_dimension(d) != n) throw DimensionError("chain samples do not have length 2 d^2");
  for (const auto& s : chain.samples) {
    if (s.size() != n) throw DimensionError("chain samples have unequal lengths");
  }
  const fs::path payload = payload_path(header_path);
  {
    std::ofstream out(payload, std::ios::binary | std::ios::trunc);
    if (!out) throw Error("cannot write " + payload.string());
    // One fixed-size record per sample, flushed as it goes.
    for (const auto& s : chain.samples) {
      const std::string rec = encode_payload({s});
      out.write(rec.data(), static_cast<std::streamsize>(rec.size()));
    }
  }
  json j;
  j["format"] = kFormat;
  j["d"] = d;
  j["beta"] = chain.beta;
  j["seed"] = chain.seed;
  j["thinning"] = chain.thinning;
  j["acceptance_count"] = chain.acceptance_count;
  j["proposal_count"] = chain.proposal_count;
  j["n_samples"] = chain.samples.size();
  if (chain.window) {
    j["n_min"] = chain.window->n_min();
    j["n_max"] = chain.window->n_max();
  }
  j["payload"] = payload.filename().string();
  write_json(header_path, j);
}

ChainRecord read_chain(const fs::path& header_path, PayloadCheck check) {
  const json j = read_json(header_path);
  check_format(j);
  const auto d = integer(j, "d");
  if (d < 1) throw ParseError("key 'd' must be positive");
  ChainRecord c;
  c.beta = number(j, "beta");
  if (!(c.beta > 0.0 && c.beta <= 1.0)) throw ParseError("key 'beta' must lie in (0, 1]");
  const json& seed = require(j, "seed");
  if (!seed.is_number_unsigned() && !seed.is_number_integer()) throw ParseError("key 'seed' is not an integer");
  c.seed = seed.get<std::uint64_t>();
  c.thinning = static_cast<int>(integer(j, "thinning"));
  if (c.thinning < 1) throw ParseError("key 'thinning' must be positive");
  c.acceptance_count = integer(j, "acceptance_count");
  c.proposal_count = integer(j, "proposal_count");
  if (c.acceptance_count < 0 || c.acceptance_count > c.proposal_count) {
    throw ParseError("key 'acceptance_count' must lie in [0, proposal_count]");
  }
  const auto n_samples = integer(j, "n_samples");
  if (n_samples < 0) throw ParseError("key 'n_samples' must be non-negative");
  if (j.contains("n_min") || j.contains("n_max")) {
    c.window = window_from(j);
    if (c.window->dim() != d) throw ParseError("keys 'n_min'/'n_max' disagree with 'd'");
  }
  fs::path payload = payload_path(header_path);
  if (j.contains("payload")) {
    const json& p = j["payload"];
    if (!p.is_string()) throw ParseError("key 'payload' is not a string");
    payload = header_path.parent_path() / p.get<std::string>();
  }
  const int record = param_dimension(static_cast<int>(d));
  const std::string bytes = read_file(payload);
  const std::size_t expected = 8 * static_cast<std::size_t>(record) * static_cast<std::size_t>(n_samples);
  if (check == PayloadCheck::Strict && bytes.size() != expected) {
    throw ParseError("payload length mismatch: " + payload.string() + " has " +
                     std::to_string(bytes.size()) + " bytes, header implies " + std::to_string(expected));
  }
  c.samples = decode_payload(bytes, record);
  if (c.samples.size() > static_cast<std::size_t>(n_samples)) c.samples.resize(n_samples);
  for (const auto& s : c.samples) {
    if (!s.allFinite()) throw ParseError("payload contains non-finite values");
  }
  return c;
}

std::vector<ChainRecord> read_chain_dir(const fs::path& dir) {
  std::vector<fs::path> headers;
  if (!fs::is_directory(dir)) throw ParseError("not a directory: " + dir.string());
  for (const auto& e : fs::directory_iterator(dir)) {
    const auto name = e.path().filename().string();
    if (name.rfind("chain_", 0) == 0 && e.path().extension() == ".json") headers.push_back(e.path());
  }
  std::sort(headers.begin(), headers.end());
  if (headers.empty()) throw ParseError("no chain_*.json files in " + dir.string());
  std::vector<ChainRecord> out;
  for (const auto& h : headers) out.push_back(read_chain(h));
  return out;
}

void write_temporal_csv(const fs::path& path, const PositionGrid& grid, const RVector& density) {
  std::ofstream out(path);
  if (!out) throw Error("cannot write " + path.string());
  out.precision(17);
  out << "x,value\n";
  for (int k = 0; k < grid.size(); ++k) out << grid[k] << ',' << density[k] << '\n';
}

void write_wigner_csv(const fs::path& path, const WignerTable& table) {
  std::ofstream out(path);
  if (!out) throw Error("cannot write " + path.string());
  out.precision(17);
  out << "x,p,value\n";
  for (int k = 0; k < table.grid.size(); ++k) {
    for (int p = table.momenta.n_min(); p <= table.momenta.n_max(); ++p) {
      out << table.grid[k] << ',' << p << ',' << table.at(k, p) << '\n';
    }
  }
}

}  // namespace fetomo::io
