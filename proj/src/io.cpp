#include "nlmemboot/io.hpp"

#include <cstdio>
#include <fstream>
#include <map>
#include <sstream>

#include "nlmemboot/errors.hpp"

namespace nlmemboot {

std::string format_g6(double v) {
  char buf[64];
  std::snprintf(buf, sizeof(buf), "%.6g", v);
  return buf;
}

std::string read_file(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw InvalidInputError("cannot open file: " + path.string());
  std::ostringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

void atomic_write(const std::filesystem::path& path, const std::string& content) {
  const auto dir = path.parent_path();
  if (!dir.empty()) std::filesystem::create_directories(dir);
  const auto tmp = path.string() + ".tmp";
  {
    std::ofstream out(tmp, std::ios::binary | std::ios::trunc);
    if (!out) throw InvalidInputError("cannot write file: " + tmp);
    out << content;
  }
  std::filesystem::rename(tmp, path);
}

std::string dataset_csv(const Dataset& data) {
  bool any_group = false;
  for (const auto& s : data.design.subjects)
    if (!s.group.empty()) any_group = true;

  std::ostringstream out;
  out << (any_group ? "id,x,y,group\n" : "id,x,y\n");
  for (std::size_t i = 0; i < data.design.subjects.size(); ++i) {
    const auto& s = data.design.subjects[i];
    for (std::size_t j = 0; j < s.x.size(); ++j) {
      out << s.id << ',' << format_g6(s.x[j]) << ',' << format_g6(data.y[i][j]);
      if (any_group) out << ',' << s.group;
      out << '\n';
    }
  }
  return out.str();
}

namespace {

std::vector<std::string> split_csv_line(const std::string& line) {
  std::vector<std::string> cells;
  std::string cell;
  std::istringstream ss(line);
  while (std::getline(ss, cell, ',')) cells.push_back(cell);
  if (!line.empty() && line.back() == ',') cells.push_back("");
  return cells;
}

double parse_number(const std::string& cell, int row, const char* column) {
  try {
    std::size_t pos = 0;
    const double v = std::stod(cell, &pos);
    if (pos != cell.size()) throw std::invalid_argument("trailing characters");
    return v;
  } catch (const std::exception&) {
    throw InvalidInputError("row " + std::to_string(row) + ": column '" +
                            column + "' is not a number: '" + cell + "'");
  }
}

}  // namespace

Dataset parse_dataset_csv(const std::string& text) {
  std::istringstream in(text);
  std::string line;
  if (!std::getline(in, line)) throw InvalidInputError("empty dataset file");
  if (!line.empty() && line.back() == '\r') line.pop_back();

  bool has_group = false;
  if (line == "id,x,y,group")
    has_group = true;
  else if (line != "id,x,y")
    throw InvalidInputError("row 1: expected header 'id,x,y' or 'id,x,y,group'");

  std::map<std::string, std::size_t> index;
  Dataset data;
  int row = 1;
  while (std::getline(in, line)) {
    ++row;
    if (!line.empty() && line.back() == '\r') line.pop_back();
    if (line.empty()) continue;
    const auto cells = split_csv_line(line);
    const std::size_t expected = has_group ? 4 : 3;
    if (cells.size() != expected)
      throw InvalidInputError("row " + std::to_string(row) + ": expected " +
                              std::to_string(expected) + " columns, got " +
                              std::to_string(cells.size()));
    const std::string& id = cells[0];
    if (id.empty())
      throw InvalidInputError("row " + std::to_string(row) + ": empty id");
    const double x = parse_number(cells[1], row, "x");
    const double y = parse_number(cells[2], row, "y");
    const std::string group = has_group ? cells[3] : "";

    auto it = index.find(id);
    if (it == index.end()) {
      index.emplace(id, data.design.subjects.size());
      data.design.subjects.push_back({id, {x}, group});
      data.y.push_back({y});
    } else {
      data.design.subjects[it->second].x.push_back(x);
      data.y[it->second].push_back(y);
    }
  }
  data.validate();
  return data;
}

Dataset read_dataset_csv(const std::filesystem::path& path) {
  return parse_dataset_csv(read_file(path));
}

std::vector<std::map<std::string, std::string>> parse_csv_table(
    const std::string& text) {
  std::istringstream in(text);
  std::string line;
  if (!std::getline(in, line)) throw InvalidInputError("empty CSV");
  if (!line.empty() && line.back() == '\r') line.pop_back();
  const auto header = split_csv_line(line);
  std::vector<std::map<std::string, std::string>> rows;
  int row = 1;
  while (std::getline(in, line)) {
    ++row;
    if (!line.empty() && line.back() == '\r') line.pop_back();
    if (line.empty()) continue;
    const auto cells = split_csv_line(line);
    if (cells.size() != header.size())
      throw InvalidInputError("row " + std::to_string(row) +
                              ": column count does not match the header");
    std::map<std::string, std::string> r;
    for (std::size_t c = 0; c < header.size(); ++c) r[header[c]] = cells[c];
    rows.push_back(std::move(r));
  }
  return rows;
}

void write_dataset_csv(const std::filesystem::path& path, const Dataset& data) {
  atomic_write(path, dataset_csv(data));
}

}  // namespace nlmemboot
