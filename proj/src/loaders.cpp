#include "cdmp/loaders.h"

#include <algorithm>
#include <array>
#include <charconv>
#include <fstream>
#include <map>
#include <regex>
#include <sstream>
#include <stdexcept>
#include <string_view>

namespace cdmp {

namespace fs = std::filesystem;

namespace {

const std::vector<DatasetInfo>& registry() {
  static const std::vector<DatasetInfo> infos = {
      {DatasetId::UciHar, "ucihar", 6, 30,
       {"walking", "walking_upstairs", "walking_downstairs", "sitting", "standing", "laying"}},
      {DatasetId::MotionSense, "motionsense", 6, 24,
       {"downstairs", "upstairs", "walking", "sitting", "standing", "jogging"}},
      {DatasetId::Hapt, "hapt", 12, 30,
       {"walking", "walking_upstairs", "walking_downstairs", "sitting", "standing", "laying",
        "stand_to_sit", "sit_to_stand", "sit_to_lie", "lie_to_sit", "stand_to_lie",
        "lie_to_stand"}},
  };
  return infos;
}

// MotionSense folder prefixes in class-index order.
constexpr std::string_view kMotionSensePrefixes[] = {"dws", "ups", "wlk", "sit", "std", "jog"};

std::string read_file(const fs::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw std::runtime_error("missing file: " + path.string());
  std::ostringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

std::vector<std::string_view> split_lines(std::string_view text) {
  std::vector<std::string_view> lines;
  std::size_t pos = 0;
  while (pos < text.size()) {
    std::size_t end = text.find('\n', pos);
    if (end == std::string_view::npos) end = text.size();
    std::string_view line = text.substr(pos, end - pos);
    if (!line.empty() && line.back() == '\r') line.remove_suffix(1);
    if (line.find_first_not_of(" \t") != std::string_view::npos) lines.push_back(line);
    pos = end + 1;
  }
  return lines;
}

double parse_number(std::string_view token, const fs::path& path, std::size_t line) {
  while (!token.empty() && (token.front() == ' ' || token.front() == '\t')) token.remove_prefix(1);
  while (!token.empty() && (token.back() == ' ' || token.back() == '\t')) token.remove_suffix(1);
  if (!token.empty() && token.front() == '+') token.remove_prefix(1);
  double value = 0;
  const auto [ptr, ec] = std::from_chars(token.data(), token.data() + token.size(), value);
  if (ec != std::errc() || ptr != token.data() + token.size()) {
    throw std::runtime_error(path.string() + ":" + std::to_string(line) + ": cannot parse number '" +
                             std::string(token) + "'");
  }
  return value;
}

std::vector<double> parse_whitespace_row(std::string_view line, const fs::path& path,
                                         std::size_t line_no) {
  std::vector<double> values;
  std::size_t pos = 0;
  while (true) {
    pos = line.find_first_not_of(" \t", pos);
    if (pos == std::string_view::npos) break;
    std::size_t end = line.find_first_of(" \t", pos);
    if (end == std::string_view::npos) end = line.size();
    values.push_back(parse_number(line.substr(pos, end - pos), path, line_no));
    pos = end;
  }
  return values;
}

std::vector<std::string_view> split_commas(std::string_view line) {
  std::vector<std::string_view> fields;
  std::size_t pos = 0;
  while (true) {
    const std::size_t end = line.find(',', pos);
    fields.push_back(line.substr(pos, end == std::string_view::npos ? line.size() - pos : end - pos));
    if (end == std::string_view::npos) break;
    pos = end + 1;
  }
  return fields;
}

std::vector<std::vector<double>> read_matrix(const fs::path& path, std::size_t columns) {
  const std::string text = read_file(path);
  std::vector<std::vector<double>> rows;
  std::size_t line_no = 0;
  for (std::string_view line : split_lines(text)) {
    ++line_no;
    auto row = parse_whitespace_row(line, path, line_no);
    if (row.size() != columns) {
      throw std::runtime_error(path.string() + ":" + std::to_string(line_no) + ": expected " +
                               std::to_string(columns) + " values, found " +
                               std::to_string(row.size()));
    }
    rows.push_back(std::move(row));
  }
  return rows;
}

std::vector<int> read_int_column(const fs::path& path) {
  std::vector<int> values;
  for (const auto& row : read_matrix(path, 1)) values.push_back(static_cast<int>(row[0]));
  return values;
}

bool is_hidden(const fs::path& p) {
  const std::string name = p.filename().string();
  return name.empty() || name.front() == '.' || name.rfind("__", 0) == 0;
}

std::vector<fs::path> sorted_entries(const fs::path& dir) {
  if (!fs::is_directory(dir)) throw std::runtime_error("missing directory: " + dir.string());
  std::vector<fs::path> entries;
  for (const auto& e : fs::directory_iterator(dir)) {
    if (!is_hidden(e.path())) entries.push_back(e.path());
  }
  std::sort(entries.begin(), entries.end());
  return entries;
}

const std::regex& hapt_acc_pattern() {
  static const std::regex re(R"(acc_exp(\d+)_user(\d+)\.txt)");
  return re;
}

}  // namespace

const DatasetInfo& dataset_info(DatasetId id) {
  for (const auto& info : registry()) {
    if (info.id == id) return info;
  }
  throw std::invalid_argument("unknown dataset id");
}

DatasetId dataset_from_name(const std::string& name) {
  for (const auto& info : registry()) {
    if (info.name == name) return info.id;
  }
  throw std::invalid_argument("unknown dataset '" + name + "' (expected ucihar, motionsense or hapt)");
}

WindowSet load_ucihar(const fs::path& root, const WindowLayout& layout) {
  layout.validate();
  constexpr std::size_t kRowLength = 128;
  if (layout.length > kRowLength) {
    throw std::invalid_argument("UCI HAR rows hold 128 samples; window length " +
                                std::to_string(layout.length) + " is too long");
  }
  std::vector<WindowSet> parts;
  for (const std::string part : {"test", "train"}) {
    const fs::path dir = root / part;
    const fs::path signals = dir / "Inertial Signals";
    std::vector<std::vector<std::vector<double>>> axes;
    for (const char axis : {'x', 'y', 'z'}) {
      axes.push_back(read_matrix(signals / ("total_acc_" + std::string(1, axis) + "_" + part + ".txt"),
                                 kRowLength));
    }
    const fs::path label_path = dir / ("y_" + part + ".txt");
    const fs::path subject_path = dir / ("subject_" + part + ".txt");
    const std::vector<int> labels = read_int_column(label_path);
    const std::vector<int> subjects = read_int_column(subject_path);
    const std::size_t rows = labels.size();
    if (axes[0].size() != rows || axes[1].size() != rows || axes[2].size() != rows ||
        subjects.size() != rows) {
      throw std::runtime_error("UCI HAR " + part + ": row counts differ between signal, label (" +
                               std::to_string(rows) + ") and subject (" +
                               std::to_string(subjects.size()) + ") files");
    }
    WindowSet set;
    std::vector<float> data;
    data.reserve(rows * layout.length * 3);
    for (std::size_t r = 0; r < rows; ++r) {
      if (labels[r] < 1 || labels[r] > 6) {
        throw std::runtime_error(label_path.string() + ":" + std::to_string(r + 1) + ": label " +
                                 std::to_string(labels[r]) + " outside 1..6");
      }
      for (std::size_t t = 0; t < layout.length; ++t) {
        for (std::size_t a = 0; a < 3; ++a) data.push_back(static_cast<float>(axes[a][r][t]));
      }
      set.labels.push_back(labels[r] - 1);
      set.subject_ids.push_back(subjects[r]);
      set.sources.push_back("ucihar/" + part + "#" + std::to_string(r));
    }
    if (rows > 0) set.windows = Tensor({rows, layout.length, 3}, std::move(data));
    parts.push_back(std::move(set));
  }
  return WindowSet::concat(parts);
}

std::vector<RawRecording> load_motionsense(const fs::path& root) {
  const fs::path base = root / "A_DeviceMotion_data";
  std::vector<RawRecording> recordings;
  for (const fs::path& folder : sorted_entries(base)) {
    if (!fs::is_directory(folder)) continue;
    const std::string name = folder.filename().string();
    const std::string prefix = name.substr(0, name.find('_'));
    const auto it = std::find(std::begin(kMotionSensePrefixes), std::end(kMotionSensePrefixes), prefix);
    if (it == std::end(kMotionSensePrefixes)) {
      throw std::runtime_error("unknown MotionSense activity prefix '" + prefix + "' in " +
                               folder.string());
    }
    const int label = static_cast<int>(it - std::begin(kMotionSensePrefixes));
    for (const fs::path& file : sorted_entries(folder)) {
      const std::string fname = file.filename().string();
      if (file.extension() != ".csv" || fname.rfind("sub_", 0) != 0) continue;
      int subject = 0;
      const std::string id = fname.substr(4, fname.size() - 8);
      const auto [p, ec] = std::from_chars(id.data(), id.data() + id.size(), subject);
      if (ec != std::errc() || p != id.data() + id.size()) {
        throw std::runtime_error("cannot parse subject id from " + file.string());
      }

      const std::string text = read_file(file);
      const auto lines = split_lines(text);
      if (lines.empty()) throw std::runtime_error("malformed CSV header (empty file): " + file.string());
      const auto header = split_commas(lines[0]);
      std::array<std::size_t, 3> cols{};
      for (std::size_t a = 0; a < 3; ++a) {
        const std::string want = std::string("userAcceleration.") + "xyz"[a];
        const auto h = std::find_if(header.begin(), header.end(), [&](std::string_view f) {
          if (f.size() >= 2 && f.front() == '"' && f.back() == '"') f = f.substr(1, f.size() - 2);
          return f == want;
        });
        if (h == header.end()) {
          throw std::runtime_error("malformed CSV header (no " + want + " column): " + file.string());
        }
        cols[a] = static_cast<std::size_t>(h - header.begin());
      }
      std::vector<float> data;
      data.reserve((lines.size() - 1) * 3);
      for (std::size_t l = 1; l < lines.size(); ++l) {
        const auto fields = split_commas(lines[l]);
        if (fields.size() != header.size()) {
          throw std::runtime_error(file.string() + ":" + std::to_string(l + 1) + ": expected " +
                                   std::to_string(header.size()) + " fields, found " +
                                   std::to_string(fields.size()));
        }
        for (std::size_t a = 0; a < 3; ++a) {
          data.push_back(static_cast<float>(parse_number(fields[cols[a]], file, l + 1)));
        }
      }
      RawRecording rec;
      rec.subject_id = subject;
      rec.source = "motionsense/" + name + "/" + fname;
      const std::size_t n = data.size() / 3;
      if (n > 0) rec.samples = Tensor({n, 3}, std::move(data));
      rec.labels = std::vector<int>(n, label);
      recordings.push_back(std::move(rec));
    }
  }
  return recordings;
}

std::vector<RawRecording> load_hapt(const fs::path& root) {
  const fs::path base = root / "RawData";
  std::vector<RawRecording> recordings;
  std::map<std::pair<int, int>, std::size_t> index;  // (experiment, user) -> recording
  for (const fs::path& file : sorted_entries(base)) {
    const std::string fname = file.filename().string();
    std::smatch m;
    if (!std::regex_match(fname, m, hapt_acc_pattern())) continue;
    const int experiment = std::stoi(m[1]);
    const int user = std::stoi(m[2]);
    const auto rows = read_matrix(file, 3);
    std::vector<float> data;
    data.reserve(rows.size() * 3);
    for (const auto& row : rows) {
      for (double v : row) data.push_back(static_cast<float>(v));
    }
    RawRecording rec;
    rec.subject_id = user;
    rec.source = "hapt/" + fname;
    if (!rows.empty()) rec.samples = Tensor({rows.size(), 3}, std::move(data));
    rec.labels = std::vector<int>(rows.size(), kUnlabeled);
    index[{experiment, user}] = recordings.size();
    recordings.push_back(std::move(rec));
  }
  if (recordings.empty()) throw std::runtime_error("no acc_expXX_userYY.txt files in " + base.string());

  const fs::path labels_path = base / "labels.txt";
  const auto rows = read_matrix(labels_path, 5);
  for (std::size_t r = 0; r < rows.size(); ++r) {
    const int experiment = static_cast<int>(rows[r][0]);
    const int user = static_cast<int>(rows[r][1]);
    const int activity = static_cast<int>(rows[r][2]);
    const long start = static_cast<long>(rows[r][3]);
    const long end = static_cast<long>(rows[r][4]);
    const std::string where = labels_path.string() + ":" + std::to_string(r + 1);
    const auto it = index.find({experiment, user});
    if (it == index.end()) {
      throw std::runtime_error(where + ": no recording for experiment " + std::to_string(experiment) +
                               ", user " + std::to_string(user));
    }
    if (activity < 1 || activity > 12) {
      throw std::runtime_error(where + ": activity id " + std::to_string(activity) + " outside 1..12");
    }
    RawRecording& rec = recordings[it->second];
    const long n = static_cast<long>(rec.size());
    if (start < 1 || end < start || end > n) {
      throw std::runtime_error(where + ": interval [" + std::to_string(start) + ", " +
                               std::to_string(end) + "] outside " + rec.source + " (" +
                               std::to_string(n) + " samples)");
    }
    auto& labels = *rec.labels;
    std::fill(labels.begin() + (start - 1), labels.begin() + end, activity - 1);
  }
  return recordings;
}

PreparedDataset prepare_dataset(DatasetId id, const fs::path& root, const WindowLayout& layout) {
  layout.validate();
  PreparedDataset out;
  out.id = id;
  out.layout = layout;
  switch (id) {
    case DatasetId::UciHar:
      out.windows = load_ucihar(root, layout);
      break;
    case DatasetId::MotionSense:
    case DatasetId::Hapt: {
      const auto recordings = id == DatasetId::Hapt ? load_hapt(root) : load_motionsense(root);
      std::vector<WindowSet> parts;
      parts.reserve(recordings.size());
      for (const auto& rec : recordings) parts.push_back(make_windows(rec, layout, false));
      out.windows = WindowSet::concat(parts);
      break;
    }
  }
  out.windows.validate();
  out.source_files = dataset_source_files(id, root);
  return out;
}

std::vector<fs::path> dataset_source_files(DatasetId id, const fs::path& root) {
  std::vector<fs::path> files;
  switch (id) {
    case DatasetId::UciHar:
      for (const std::string part : {"test", "train"}) {
        for (const char axis : {'x', 'y', 'z'}) {
          files.push_back(fs::path(part) / "Inertial Signals" /
                          ("total_acc_" + std::string(1, axis) + "_" + part + ".txt"));
        }
        files.push_back(fs::path(part) / ("subject_" + part + ".txt"));
        files.push_back(fs::path(part) / ("y_" + part + ".txt"));
      }
      break;
    case DatasetId::MotionSense:
      for (const fs::path& folder : sorted_entries(root / "A_DeviceMotion_data")) {
        if (!fs::is_directory(folder)) continue;
        for (const fs::path& file : sorted_entries(folder)) {
          if (file.extension() == ".csv") files.push_back(fs::relative(file, root));
        }
      }
      break;
    case DatasetId::Hapt:
      for (const fs::path& file : sorted_entries(root / "RawData")) {
        const std::string fname = file.filename().string();
        if (std::regex_match(fname, hapt_acc_pattern()) || fname == "labels.txt") {
          files.push_back(fs::relative(file, root));
        }
      }
      break;
  }
  std::sort(files.begin(), files.end());
  return files;
}

}  // namespace cdmp
