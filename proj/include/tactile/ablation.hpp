#pragma once

#include <cstdio>
#include <exception>
#include <functional>
#include <map>
#include <memory>
#include <sstream>
#include <string>
#include <thread>
#include <vector>

#include "tactile/config.hpp"

namespace tactile {

/// Runs fn(0..n-1) on up to `workers` threads. Work item i always goes to
/// worker i % workers, so results written by index are order-independent.
inline void parallel_for(std::size_t n, int workers, const std::function<void(std::size_t)>& fn) {
  const auto nw = static_cast<std::size_t>(std::max(1, workers));
  if (nw <= 1 || n <= 1) {
    for (std::size_t i = 0; i < n; ++i) fn(i);
    return;
  }
  std::vector<std::exception_ptr> errs(n);
  std::vector<std::thread> pool;
  for (std::size_t w = 0; w < std::min(nw, n); ++w)
    pool.emplace_back([&, w] {
      for (std::size_t i = w; i < n; i += nw) {
        try {
          fn(i);
        } catch (...) {
          errs[i] = std::current_exception();
        }
      }
    });
  for (auto& t : pool) t.join();
  for (auto& e : errs)
    if (e) std::rethrow_exception(e);
}

inline bool is_baseline(const std::string& v) { return v == "grid" || v == "random"; }

struct AblationResult {
  std::vector<ResultRow> rows;  // variants x objects, in config order
  std::vector<std::string> variants;
  std::vector<std::string> objects;
};

/// For every variant: baselines run directly; reward variants use the
/// configured checkpoint or are trained once per seed. Each (variant,
/// object) row averages trials over all seeds.
inline AblationResult run_ablation(const ExperimentConfig& cfg, int workers = 1,
                                   const std::function<void(const std::string&)>& progress = {}) {
  cfg.validate();
  AblationResult out;
  out.variants = cfg.variants;
  out.objects = cfg.objects;

  std::vector<std::shared_ptr<const ObjectModel>> train_objects;
  for (const auto& n : cfg.train_objects) train_objects.push_back(cfg.load_object(n));
  std::map<std::string, std::shared_ptr<const ObjectModel>> objects;
  for (const auto& n : cfg.objects) objects[n] = cfg.load_object(n);

  // (variant, seed) -> policy
  struct Job {
    std::string variant;
    std::uint64_t seed;
    PolicySource policy;
  };
  std::vector<Job> jobs;
  for (const auto& v : cfg.variants)
    for (auto s : cfg.seeds) jobs.push_back({v, s, {}});
  parallel_for(jobs.size(), workers, [&](std::size_t i) {
    Job& j = jobs[i];
    if (j.variant == "grid") {
      j.policy = PolicySource::grid();
    } else if (j.variant == "random") {
      j.policy = PolicySource::random();
    } else if (auto it = cfg.checkpoints.find(j.variant); it != cfg.checkpoints.end()) {
      j.policy = PolicySource::network(std::make_shared<const Checkpoint>(load_checkpoint(it->second)), j.variant);
    } else {
      if (progress) progress("training " + j.variant + " seed " + std::to_string(j.seed));
      auto res = train(cfg.train_config(j.seed, j.variant), train_objects);
      j.policy = PolicySource::network(std::make_shared<const Checkpoint>(std::move(res.checkpoint)), j.variant);
    }
  });

  std::vector<ResultRow> cells(jobs.size() * cfg.objects.size());
  parallel_for(cells.size(), workers, [&](std::size_t i) {
    const Job& j = jobs[i / cfg.objects.size()];
    const auto& name = cfg.objects[i % cfg.objects.size()];
    if (progress) progress("evaluating " + j.variant + " on " + name + " seed " + std::to_string(j.seed));
    cells[i] = evaluate(j.policy, objects.at(name), cfg.eval_config(j.seed, name));
    cells[i].variant = j.variant;
  });

  const std::size_t ns = cfg.seeds.size();
  for (std::size_t v = 0; v < cfg.variants.size(); ++v)
    for (std::size_t o = 0; o < cfg.objects.size(); ++o) {
      ResultRow row;
      row.variant = cfg.variants[v];
      row.object = cfg.objects[o];
      for (std::size_t s = 0; s < ns; ++s) {
        const auto& c = cells[(v * ns + s) * cfg.objects.size() + o];
        row.mean_iou += c.mean_iou * c.trials;
        row.mean_auc += c.mean_auc * c.trials;
        row.trials += c.trials;
        row.seeds.insert(row.seeds.end(), c.seeds.begin(), c.seeds.end());
      }
      row.mean_iou /= row.trials;
      row.mean_auc /= row.trials;
      out.rows.push_back(std::move(row));
    }
  return out;
}

/// Columns: variant,object,mean_IoU,mean_AUC,trials,seeds (seeds joined by ';').
inline void write_results_csv(std::ostream& o, const std::vector<ResultRow>& rows) {
  o << "variant,object,mean_IoU,mean_AUC,trials,seeds\n";
  for (const auto& r : rows) {
    o << r.variant << ',' << r.object << ',' << format_real(r.mean_iou) << ',' << format_real(r.mean_auc) << ',' << r.trials << ',';
    for (std::size_t i = 0; i < r.seeds.size(); ++i) o << (i ? ";" : "") << r.seeds[i];
    o << '\n';
  }
}

/// Variants as rows, objects as column pairs (IoU, ADD-S AUC), then the
/// per-variant average.
inline std::string render_table(const AblationResult& a) {
  std::ostringstream o;
  char buf[64];
  std::size_t vw = 7;
  for (const auto& v : a.variants) vw = std::max(vw, v.size());
  auto pad = [](const std::string& s, std::size_t w) { return s + std::string(w > s.size() ? w - s.size() : 0, ' '); };
  std::vector<std::string> cols = a.objects;
  cols.push_back("Average");
  std::vector<std::size_t> cw;
  for (const auto& c : cols) cw.push_back(std::max<std::size_t>(c.size(), 13));
  o << pad("Variant", vw);
  for (std::size_t k = 0; k < cols.size(); ++k) o << " | " << pad(cols[k], cw[k]);
  o << '\n' << pad("", vw);
  for (std::size_t k = 0; k < cols.size(); ++k) o << " | " << pad("IoU    ADD-S", cw[k]);
  o << '\n' << std::string(vw, '-');
  for (std::size_t k = 0; k < cols.size(); ++k) o << "-+-" << std::string(cw[k], '-');
  o << '\n';
  for (std::size_t v = 0; v < a.variants.size(); ++v) {
    o << pad(a.variants[v], vw);
    double si = 0, sa = 0;
    for (std::size_t k = 0; k < a.objects.size(); ++k) {
      const auto& r = a.rows[v * a.objects.size() + k];
      si += r.mean_iou;
      sa += r.mean_auc;
      std::snprintf(buf, sizeof buf, "%.3f  %.3f", r.mean_iou, r.mean_auc);
      o << " | " << pad(buf, cw[k]);
    }
    const double n = static_cast<double>(std::max<std::size_t>(1, a.objects.size()));
    std::snprintf(buf, sizeof buf, "%.3f  %.3f", si / n, sa / n);
    o << " | " << pad(buf, cw.back()) << '\n';
  }
  return o.str();
}

}  // namespace tactile
