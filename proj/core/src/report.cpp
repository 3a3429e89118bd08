#include <fmt/format.h>

#include <cmath>
#include <fstream>
#include <set>
#include <sstream>

#include "json.hpp"
#include "lal/harness.hpp"

namespace lal {
namespace {

using SeedPair = std::pair<std::uint64_t, std::uint64_t>;
using TraceMap = std::map<std::string, std::map<SeedPair, std::vector<double>>>;

struct ResultSet {
  std::string dataset;
  std::filesystem::path dir;
  nlohmann::json summary;
  std::vector<std::string> strategies;  // config order
  TraceMap traces;
  std::map<std::string, std::vector<PrecisionRecall>> rare;
};

std::vector<std::string> split_commas(const std::string& line) {
  std::vector<std::string> out;
  std::string cell;
  std::stringstream ss(line);
  while (std::getline(ss, cell, ',')) out.push_back(cell);
  if (!line.empty() && line.back() == ',') out.emplace_back();
  return out;
}

std::vector<std::vector<std::string>> read_csv(const std::filesystem::path& path, std::string_view header) {
  std::ifstream in(path);
  if (!in) throw Error("cannot read " + path.string());
  std::string line;
  if (!std::getline(in, line) || line != header) throw Error("unexpected header in " + path.string());
  std::vector<std::vector<std::string>> rows;
  std::size_t lineno = 1;
  while (std::getline(in, line)) {
    ++lineno;
    if (line.empty()) continue;
    rows.push_back(split_commas(line));
    if (rows.back().size() != split_commas(std::string(header)).size()) {
      throw ParseError(lineno, path.string() + ": wrong column count");
    }
  }
  return rows;
}

ResultSet load_results(const std::filesystem::path& dir) {
  ResultSet rs;
  rs.dir = dir;
  {
    std::ifstream in(dir / "summary.json");
    if (!in) throw Error("no summary.json in " + dir.string());
    rs.summary = nlohmann::json::parse(in);
  }
  if (rs.summary.value("schema_version", 0) != kSummarySchemaVersion) {
    throw Error("unsupported summary schema in " + dir.string());
  }
  rs.dataset = rs.summary.value("name", dir.filename().string());
  for (const auto& s : rs.summary.at("strategies")) rs.strategies.push_back(s.at("strategy"));
  for (const auto& row : read_csv(dir / "traces.csv", "strategy,setting,data_seed,run_seed,step,score")) {
    auto& trace = rs.traces[row[0]][{std::stoull(row[2]), std::stoull(row[3])}];
    const auto step = std::stoull(row[4]);
    if (step != trace.size()) throw Error("traces.csv steps out of order in " + dir.string());
    trace.push_back(std::stod(row[5]));
  }
  const auto runs = read_csv(dir / "runs.csv",
                             "strategy,setting,data_seed,run_seed,auac,final_score,rare_class,rare_precision,"
                             "rare_recall,fits,status");
  for (const auto& row : runs) {
    if (row[10] != "ok") continue;
    rs.rare[row[0]].push_back({std::stod(row[7]), std::stod(row[8]), false});
  }
  if (rs.traces.empty()) throw Error("no completed runs in " + dir.string());
  return rs;
}

std::string mean_sd(const std::vector<double>& v, int precision = 3) {
  if (v.empty()) return "n/a";
  return fmt::format("{:.{}f} ± {:.{}f}", mean(v), precision, stdev(v), precision);
}

}  // namespace

std::vector<RelativeCurve> relative_curves(const TraceMap& traces) {
  static const std::set<std::string> excluded{"oracle", "random", "np"};
  std::vector<std::string> remaining;
  for (const auto& [name, runs] : traces) {
    if (!excluded.contains(name)) remaining.push_back(name);
  }
  if (remaining.empty()) return {};
  std::set<SeedPair> seeds;
  for (const auto& [pair, tr] : traces.begin()->second) seeds.insert(pair);
  for (const auto& [name, runs] : traces) {
    std::set<SeedPair> here;
    for (const auto& [pair, tr] : runs) {
      if (seeds.contains(pair)) here.insert(pair);
    }
    seeds = std::move(here);
  }
  if (seeds.empty()) return {};
  const std::size_t len = traces.at(remaining.front()).at(*seeds.begin()).size();

  std::map<std::string, std::vector<std::vector<double>>> diffs;  // strategy -> step -> per-seed diff
  for (const auto& pair : seeds) {
    std::vector<double> avg(len, 0.0);
    std::string best;
    double best_auac = -1.0;
    for (const auto& name : remaining) {
      const auto& tr = traces.at(name).at(pair);
      if (tr.size() != len) throw Error("traces differ in length");
      for (std::size_t t = 0; t < len; ++t) avg[t] += tr[t] / static_cast<double>(remaining.size());
      const double a = auac(tr);
      if (a > best_auac) {
        best_auac = a;
        best = name;
      }
    }
    auto add = [&](const std::string& label, const std::vector<double>& tr) {
      auto& d = diffs[label];
      d.resize(len);
      for (std::size_t t = 0; t < len; ++t) d[t].push_back(tr[t] - avg[t]);
    };
    for (const auto& name : {std::string("random"), std::string("oracle"), std::string("np")}) {
      if (traces.contains(name)) add(name, traces.at(name).at(pair));
    }
    add("best", traces.at(best).at(pair));
  }
  std::vector<RelativeCurve> out;
  for (const auto& name : {"random", "oracle", "np", "best"}) {
    if (!diffs.contains(name)) continue;
    RelativeCurve c;
    c.strategy = name;
    for (const auto& per_seed : diffs.at(name)) {
      c.mean.push_back(mean(per_seed));
      c.two_stderr.push_back(2.0 * stdev(per_seed) / std::sqrt(static_cast<double>(per_seed.size())));
    }
    out.push_back(std::move(c));
  }
  return out;
}

std::string report(const std::filesystem::path& dir, const ReportOptions& options) {
  std::vector<ResultSet> sets;
  if (std::filesystem::exists(dir / "summary.json")) {
    sets.push_back(load_results(dir));
  } else if (std::filesystem::is_directory(dir)) {
    std::vector<std::filesystem::path> subdirs;
    for (const auto& e : std::filesystem::directory_iterator(dir)) {
      if (e.is_directory() && std::filesystem::exists(e.path() / "summary.json")) subdirs.push_back(e.path());
    }
    std::sort(subdirs.begin(), subdirs.end());
    for (const auto& p : subdirs) sets.push_back(load_results(p));
  }
  if (sets.empty()) throw Error("no results found under " + dir.string());
  const std::string key = sets.front().summary.value("comparison_key", "");
  std::set<std::string> names;
  for (const auto& s : sets) {
    if (s.summary.value("comparison_key", "") != key) {
      throw ConfigError(fmt::format("incompatible results: '{}' vs '{}'", key, s.summary.value("comparison_key", "")));
    }
    if (!names.insert(s.dataset).second) throw ConfigError("two result sets share the name " + s.dataset);
  }

  std::string text;
  std::string curves_csv = "dataset,strategy,step,mean,two_stderr\n";
  std::map<std::string, std::map<std::string, double>> auac_by_dataset;
  for (const auto& s : sets) {
    text += fmt::format("## {} ({}, {})\n\n", s.dataset, s.summary.value("setting", "?"), s.summary.value("classifier", "?"));
    text += "| strategy | runs | AUAC | final score | rare precision | rare recall |\n";
    text += "|---|---|---|---|---|---|\n";
    for (const auto& name : s.strategies) {
      if (!s.traces.contains(name)) {
        text += fmt::format("| {} | 0 | n/a | n/a | n/a | n/a |\n", name);
        continue;
      }
      std::vector<double> a, f, p, r;
      for (const auto& [pair, tr] : s.traces.at(name)) {
        a.push_back(auac(tr));
        f.push_back(tr.back());
      }
      if (s.rare.contains(name)) {
        for (const auto& pr : s.rare.at(name)) {
          p.push_back(pr.precision);
          r.push_back(pr.recall);
        }
      }
      auac_by_dataset[s.dataset][name] = mean(a);
      text += fmt::format("| {} | {} | {} | {} | {} | {} |\n", name, a.size(), mean_sd(a, 2), mean_sd(f), mean_sd(p),
                          mean_sd(r));
    }
    text += "\n";
    const auto curves = relative_curves(s.traces);
    if (curves.empty()) {
      text += "warning: no strategies besides oracle, random and np; relative curves omitted\n\n";
    } else {
      text += "Difference to the AL average per step (mean ± 2 stderr):\n\n";
      for (const auto& c : curves) {
        text += fmt::format("{:>7}:", c.strategy);
        for (std::size_t t = 0; t < c.mean.size(); ++t) {
          text += fmt::format(" {:+.3f}±{:.3f}", c.mean[t], c.two_stderr[t]);
          curves_csv += fmt::format("{},{},{},{},{}\n", s.dataset, c.strategy, t, c.mean[t], c.two_stderr[t]);
        }
        text += "\n";
      }
      text += "\n";
    }
  }

  const auto ranks = rank_strategies(auac_by_dataset);
  std::vector<std::pair<std::string, RankStat>> ordered(ranks.begin(), ranks.end());
  std::stable_sort(ordered.begin(), ordered.end(), [](const auto& a, const auto& b) { return a.second.mean < b.second.mean; });
  std::string ranks_csv = "strategy,mean_rank,stdev_rank\n";
  text += fmt::format("## Ranks over {} dataset(s)\n\n| strategy | mean rank | stdev |\n|---|---|---|\n", sets.size());
  for (const auto& [name, stat] : ordered) {
    text += fmt::format("| {} | {:.2f} | {:.2f} |\n", name, stat.mean, stat.stdev);
    ranks_csv += fmt::format("{},{},{}\n", name, stat.mean, stat.stdev);
  }

  if (options.write_files) {
    auto write = [&](const char* name, const std::string& body) {
      std::ofstream out(dir / name, std::ios::trunc);
      if (!out) throw Error(fmt::format("cannot write {}", (dir / name).string()));
      out << body;
    };
    write("report.md", text);
    write("curves.csv", curves_csv);
    write("ranks.csv", ranks_csv);
  }
  return text;
}

}  // namespace lal
