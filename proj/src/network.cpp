#include "netreg/network.hpp"

#include <algorithm>
#include <charconv>
#include <fstream>
#include <map>
#include <sstream>

namespace netreg {

BlockAssignment::BlockAssignment(std::vector<int> g, int B)
    : labels(std::move(g)), num_blocks(B) {
  if (B < 1) throw ValidationError("block count must be at least 1");
  std::vector<int> sizes(static_cast<std::size_t>(B), 0);
  for (int gi : labels) {
    if (gi < 0 || gi >= B)
      throw ValidationError("block label out of range [1.." +
                            std::to_string(B) + "]");
    ++sizes[static_cast<std::size_t>(gi)];
  }
  for (int b = 0; b < B; ++b) {
    if (sizes[static_cast<std::size_t>(b)] == 0)
      throw ValidationError("declared block " + std::to_string(b + 1) +
                            " has no actors");
  }
}

std::vector<int> BlockAssignment::block_sizes() const {
  std::vector<int> sizes(static_cast<std::size_t>(num_blocks), 0);
  for (int gi : labels) ++sizes[static_cast<std::size_t>(gi)];
  return sizes;
}

DirectedNetwork::DirectedNetwork(int n, Eigen::VectorXd y,
                                 Eigen::MatrixXd covariates,
                                 std::vector<std::string> actor_labels)
    : n_(n), y_(std::move(y)), covariates_(std::move(covariates)),
      labels_(std::move(actor_labels)) {
  if (n_ < 3) throw ValidationError("network needs at least 3 actors");
  const int nd = n_ * (n_ - 1);
  if (y_.size() != nd)
    throw ValidationError("response length " + std::to_string(y_.size()) +
                          " does not match n(n-1)=" + std::to_string(nd));
  if (covariates_.size() > 0 && covariates_.rows() != nd)
    throw ValidationError("covariate rows do not match n(n-1)");
  if (covariates_.size() == 0) covariates_.resize(nd, 0);
  if (labels_.empty()) {
    labels_.reserve(static_cast<std::size_t>(n_));
    for (int i = 0; i < n_; ++i) labels_.push_back(std::to_string(i + 1));
  }
  if (static_cast<int>(labels_.size()) != n_)
    throw ValidationError("actor label count does not match n");
}

namespace {

std::vector<std::string> split_csv_line(const std::string& line) {
  std::vector<std::string> out;
  std::string cur;
  for (char c : line) {
    if (c == ',') {
      out.push_back(cur);
      cur.clear();
    } else if (c != '\r') {
      cur += c;
    }
  }
  out.push_back(cur);
  return out;
}

bool parse_double(const std::string& s, double& out) {
  const char* b = s.data();
  const char* e = b + s.size();
  while (b < e && (*b == ' ' || *b == '\t')) ++b;
  while (e > b && (*(e - 1) == ' ' || *(e - 1) == '\t')) --e;
  auto [p, ec] = std::from_chars(b, e, out);
  return ec == std::errc() && p == e;
}

}  // namespace

CsvParseResult parse_network_csv(const std::string& content) {
  CsvParseResult res;
  std::istringstream in(content);
  std::string line;
  if (!std::getline(in, line)) {
    res.errors.push_back("empty file");
    return res;
  }
  auto header = split_csv_line(line);
  if (header.size() < 3 || header[0] != "src" || header[1] != "dst" ||
      header[2] != "y") {
    res.errors.push_back("header must start with src,dst,y");
    return res;
  }
  const int k = static_cast<int>(header.size()) - 3;

  // Actors indexed by first appearance.
  std::map<std::string, int> actor_of;
  std::vector<std::string> labels;
  auto actor_id = [&](const std::string& name) {
    auto it = actor_of.find(name);
    if (it != actor_of.end()) return it->second;
    int id = static_cast<int>(labels.size());
    actor_of.emplace(name, id);
    labels.push_back(name);
    return id;
  };

  struct Row {
    int i, j, line_no;
    double y;
    std::vector<double> x;
  };
  std::vector<Row> rows;
  std::map<std::pair<int, int>, int> seen;  // dyad -> first line number
  int line_no = 1;
  while (std::getline(in, line)) {
    ++line_no;
    if (line.empty()) continue;
    auto fields = split_csv_line(line);
    if (static_cast<int>(fields.size()) != 3 + k) {
      res.errors.push_back("line " + std::to_string(line_no) + ": expected " +
                           std::to_string(3 + k) + " fields, got " +
                           std::to_string(fields.size()));
      continue;
    }
    Row r;
    r.line_no = line_no;
    if (fields[0] == fields[1]) {
      res.errors.push_back("line " + std::to_string(line_no) +
                           ": self-loop src==dst ('" + fields[0] + "')");
      continue;
    }
    r.i = actor_id(fields[0]);
    r.j = actor_id(fields[1]);
    bool ok = parse_double(fields[2], r.y);
    if (!ok)
      res.errors.push_back("line " + std::to_string(line_no) +
                           ": non-numeric response '" + fields[2] + "'");
    r.x.resize(static_cast<std::size_t>(k));
    for (int c = 0; c < k; ++c) {
      if (!parse_double(fields[static_cast<std::size_t>(3 + c)],
                        r.x[static_cast<std::size_t>(c)])) {
        res.errors.push_back("line " + std::to_string(line_no) +
                             ": non-numeric covariate '" +
                             fields[static_cast<std::size_t>(3 + c)] + "'");
        ok = false;
      }
    }
    if (!ok) continue;
    auto key = std::make_pair(r.i, r.j);
    auto it = seen.find(key);
    if (it != seen.end()) {
      res.errors.push_back("line " + std::to_string(line_no) +
                           ": duplicate ordered pair (" + fields[0] + "," +
                           fields[1] + ") first seen on line " +
                           std::to_string(it->second));
      continue;
    }
    seen.emplace(key, line_no);
    rows.push_back(std::move(r));
  }

  const int n = static_cast<int>(labels.size());
  if (n < 3) {
    res.errors.push_back("network needs at least 3 actors, found " +
                         std::to_string(n));
    return res;
  }
  for (int j = 0; j < n; ++j)
    for (int i = 0; i < n; ++i)
      if (i != j && !seen.count({i, j}))
        res.errors.push_back("missing ordered pair (" +
                             labels[static_cast<std::size_t>(i)] + "," +
                             labels[static_cast<std::size_t>(j)] + ")");
  if (!res.errors.empty()) return res;

  const int nd = n * (n - 1);
  Eigen::VectorXd y(nd);
  Eigen::MatrixXd X(nd, k);
  for (const Row& r : rows) {
    int idx = DirectedNetwork::dyad_index(r.i, r.j, n);
    y(idx) = r.y;
    for (int c = 0; c < k; ++c) X(idx, c) = r.x[static_cast<std::size_t>(c)];
  }
  res.network.emplace(n, std::move(y), std::move(X), std::move(labels));
  return res;
}

CsvParseResult read_network_csv(const std::string& path) {
  std::ifstream in(path);
  if (!in) {
    CsvParseResult res;
    res.errors.push_back("cannot open file: " + path);
    return res;
  }
  std::stringstream buf;
  buf << in.rdbuf();
  return parse_network_csv(buf.str());
}

void write_network_csv(const DirectedNetwork& net, const std::string& path) {
  std::ofstream out(path);
  if (!out) throw ValidationError("cannot write file: " + path);
  out << "src,dst,y";
  for (int c = 0; c < net.num_covariates(); ++c) out << ",x" << (c + 1);
  out << "\n";
  const auto& labels = net.actor_labels();
  char buf[40];
  for (int idx = 0; idx < net.num_dyads(); ++idx) {
    auto [i, j] = net.dyad_at(idx);
    out << labels[static_cast<std::size_t>(i)] << ','
        << labels[static_cast<std::size_t>(j)];
    std::snprintf(buf, sizeof(buf), "%.17g", net.response()(idx));
    out << ',' << buf;
    for (int c = 0; c < net.num_covariates(); ++c) {
      std::snprintf(buf, sizeof(buf), "%.17g", net.covariates()(idx, c));
      out << ',' << buf;
    }
    out << "\n";
  }
}

BlockAssignment read_blocks_csv(const std::string& path,
                                const DirectedNetwork& net) {
  std::ifstream in(path);
  if (!in) throw ValidationError("cannot open blocks file: " + path);
  std::map<std::string, int> block_of;
  std::string line;
  if (!std::getline(in, line) || split_csv_line(line).size() != 2)
    throw ValidationError("blocks file must have header actor,block");
  int line_no = 1;
  int max_block = 0;
  while (std::getline(in, line)) {
    ++line_no;
    if (line.empty()) continue;
    auto fields = split_csv_line(line);
    if (fields.size() != 2)
      throw ValidationError("blocks file line " + std::to_string(line_no) +
                            ": expected actor,block");
    double b;
    if (!parse_double(fields[1], b) || b != std::floor(b) || b < 1)
      throw ValidationError("blocks file line " + std::to_string(line_no) +
                            ": block must be a positive integer");
    block_of[fields[0]] = static_cast<int>(b) - 1;
    max_block = std::max(max_block, static_cast<int>(b));
  }
  std::vector<int> g;
  g.reserve(static_cast<std::size_t>(net.n()));
  for (const auto& label : net.actor_labels()) {
    auto it = block_of.find(label);
    if (it == block_of.end())
      throw ValidationError("blocks file missing actor '" + label + "'");
    g.push_back(it->second);
  }
  return BlockAssignment(std::move(g), max_block);
}

void write_blocks_csv(const BlockAssignment& g,
                      const std::vector<std::string>& labels,
                      const std::string& path) {
  std::ofstream out(path);
  if (!out) throw ValidationError("cannot write file: " + path);
  out << "actor,block\n";
  for (std::size_t i = 0; i < labels.size(); ++i)
    out << labels[i] << ',' << (g.labels[i] + 1) << "\n";
}

}  // namespace netreg
