#include "sermm/ema_csv.hpp"

#include <charconv>
#include <cmath>
#include <fstream>
#include <map>
#include <sstream>
#include <vector>

#include "sermm/errors.hpp"

namespace sermm {

namespace {

constexpr std::array<std::string_view, 3> kAxes = {"x", "y", "z"};
constexpr std::array<std::string_view, 3> kRotations = {"rx", "ry", "rz"};

std::vector<std::string_view> split(std::string_view line) {
  std::vector<std::string_view> out;
  while (true) {
    const auto comma = line.find(',');
    std::string_view cell = line.substr(0, comma);
    while (!cell.empty() && (cell.front() == ' ' || cell.front() == '\t')) cell.remove_prefix(1);
    while (!cell.empty() && (cell.back() == ' ' || cell.back() == '\t' || cell.back() == '\r')) {
      cell.remove_suffix(1);
    }
    out.push_back(cell);
    if (comma == std::string_view::npos) break;
    line.remove_prefix(comma + 1);
  }
  return out;
}

double parse_cell(std::string_view cell, const std::string& where) {
  if (cell == "nan" || cell == "NaN" || cell == "NAN") throw DataError(where + ": NaN cell");
  double v = 0.0;
  const auto [end, ec] = std::from_chars(cell.data(), cell.data() + cell.size(), v);
  if (ec != std::errc() || end != cell.data() + cell.size()) {
    throw DataError(where + ": cannot parse '" + std::string(cell) + "' as a number");
  }
  if (!std::isfinite(v)) throw DataError(where + ": non-finite cell");
  return v;
}

}  // namespace

EmaRecording parse_ema_csv(const std::string& text, std::string utterance_id,
                           std::string speaker_id, const std::string& source) {
  std::istringstream in(text);
  std::string line;
  if (!std::getline(in, line)) throw DataError(source + ": empty EMA file");
  const auto header = split(line);
  std::map<std::string_view, std::size_t> column;
  for (std::size_t i = 0; i < header.size(); ++i) {
    if (!column.emplace(header[i], i).second) {
      throw DataError(source + ": duplicate column '" + std::string(header[i]) + "'");
    }
  }
  if (!column.contains("time")) throw DataError(source + ": missing 'time' column");

  std::array<std::size_t, kEmaChannels> source_col{};
  std::string missing;
  std::size_t rotations = 0;
  for (std::size_t a = 0; a < kArticulatorCount; ++a) {
    for (std::size_t x = 0; x < 3; ++x) {
      const std::string name = std::string(kArticulatorNames[a]) + "_" + std::string(kAxes[x]);
      const auto it = column.find(name);
      if (it == column.end()) {
        missing += (missing.empty() ? "" : ", ") + name;
      } else {
        source_col[3 * a + x] = it->second;
      }
      const std::string rot = std::string(kArticulatorNames[a]) + "_" + std::string(kRotations[x]);
      rotations += column.contains(rot);
    }
  }
  if (!missing.empty()) throw DataError(source + ": missing sensor column(s) " + missing);
  if (rotations != 0 && rotations != kEmaChannels) {
    throw DataError(source + ": rotation columns present for only some sensors");
  }
  const std::size_t expected = 1 + kEmaChannels + rotations;
  if (header.size() != expected) {
    throw DataError(source + ": expected " + std::to_string(expected) + " columns, found " +
                    std::to_string(header.size()));
  }

  const std::size_t time_col = column.at("time");
  std::vector<double> times;
  std::vector<double> values;
  std::size_t line_no = 1;
  while (std::getline(in, line)) {
    ++line_no;
    if (line.empty() || line == "\r") continue;
    const auto cells = split(line);
    const std::string where = source + ":" + std::to_string(line_no);
    if (cells.size() != header.size()) {
      throw DataError(where + ": expected " + std::to_string(header.size()) + " cells, found " +
                      std::to_string(cells.size()));
    }
    for (std::size_t i = 0; i < cells.size(); ++i) parse_cell(cells[i], where);
    times.push_back(parse_cell(cells[time_col], where));
    for (std::size_t c = 0; c < kEmaChannels; ++c) values.push_back(parse_cell(cells[source_col[c]], where));
  }
  if (times.size() < 2) throw DataError(source + ": EMA file needs at least two rows");

  const double step = (times.back() - times.front()) / static_cast<double>(times.size() - 1);
  if (!(step > 0.0)) throw DataError(source + ": time column is not increasing");
  for (std::size_t i = 1; i < times.size(); ++i) {
    if (std::abs(times[i] - times[i - 1] - step) > kEmaTimeTolerance) {
      throw DataError(source + ": non-uniform sample times at row " + std::to_string(i + 1) +
                      " (step " + std::to_string(times[i] - times[i - 1]) + " s, expected " +
                      std::to_string(step) + " s)");
    }
  }
  const std::size_t rows = times.size();
  return EmaRecording(Matrix(rows, kEmaChannels, std::move(values)), 1.0 / step,
                      std::move(utterance_id), std::move(speaker_id));
}

EmaRecording load_ema(const std::filesystem::path& path, std::string utterance_id,
                      std::string speaker_id) {
  std::ifstream in(path);
  if (!in) throw DataError("cannot open EMA file " + path.string());
  std::ostringstream buf;
  buf << in.rdbuf();
  return parse_ema_csv(buf.str(), std::move(utterance_id), std::move(speaker_id), path.string());
}

std::string format_ema_csv(const EmaRecording& r, bool with_rotations) {
  std::ostringstream out;
  out.precision(17);
  out << "time";
  for (std::string_view a : kArticulatorNames) {
    for (std::string_view x : kAxes) out << ',' << a << '_' << x;
    if (with_rotations) {
      for (std::string_view x : kRotations) out << ',' << a << '_' << x;
    }
  }
  out << '\n';
  const double step = 1.0 / r.sample_rate_hz();
  for (std::size_t n = 0; n < r.samples(); ++n) {
    out << static_cast<double>(n) * step;
    for (std::size_t a = 0; a < kArticulatorCount; ++a) {
      for (std::size_t x = 0; x < 3; ++x) out << ',' << r.positions()(n, 3 * a + x);
      if (with_rotations) out << ",0,0,0";
    }
    out << '\n';
  }
  return out.str();
}

void save_ema(const std::filesystem::path& path, const EmaRecording& r, bool with_rotations) {
  std::ofstream out(path);
  if (!out) throw DataError("cannot write EMA file " + path.string());
  out << format_ema_csv(r, with_rotations);
  if (!out) throw DataError("failed writing EMA file " + path.string());
}

}  // namespace sermm
