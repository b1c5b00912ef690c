#include "loren/evaluation.hpp"

#include <algorithm>
#include <atomic>
#include <cmath>
#include <map>
#include <set>
#include <thread>

#include "loren/baseline.hpp"
#include "loren/errors.hpp"
#include "loren/util.hpp"

namespace loren {

std::string receiver_label(ReceiverKind kind) {
  switch (kind) {
    case ReceiverKind::BaselinePerfectCsi: return "baseline-perfect-csi";
    case ReceiverKind::BaselineLs: return "baseline-ls";
    case ReceiverKind::NeuralBase: return "neural-base";
    case ReceiverKind::Loren: return "loren";
  }
  throw ConfigError("unknown receiver kind");
}

ReceiverKind receiver_from_label(const std::string& label) {
  if (label == "baseline-perfect-csi") return ReceiverKind::BaselinePerfectCsi;
  if (label == "baseline-ls") return ReceiverKind::BaselineLs;
  if (label == "neural-base") return ReceiverKind::NeuralBase;
  if (label == "loren") return ReceiverKind::Loren;
  throw ConfigError("unknown receiver label '" + label + "'");
}

WilsonInterval wilson95(int64_t errors, int64_t blocks) {
  if (blocks <= 0) throw ShapeError("wilson95: blocks must be positive");
  if (errors < 0 || errors > blocks) throw ShapeError("wilson95: errors out of range");
  constexpr double z = 1.959963984540054;  // 97.5% normal quantile
  const double n = static_cast<double>(blocks);
  const double p = static_cast<double>(errors) / n;
  const double z2 = z * z;
  const double denom = 1.0 + z2 / n;
  const double center = (p + z2 / (2.0 * n)) / denom;
  const double half = z * std::sqrt(p * (1.0 - p) / n + z2 / (4.0 * n * n)) / denom;
  WilsonInterval w;
  // exact endpoints at the boundaries so the interval always contains p
  w.lo = errors == 0 ? 0.0 : std::max(0.0, center - half);
  w.hi = errors == blocks ? 1.0 : std::min(1.0, center + half);
  return w;
}

namespace {

uint64_t ebno_key(double ebno_db) {
  return static_cast<uint64_t>(std::llround(ebno_db * 1000.0));
}

std::vector<double> data_llrs_from_grid(const Tensor& llr_grid,
                                        const std::vector<int32_t>& data_res) {
  const int64_t B = llr_grid.dim(2);
  std::vector<double> out(data_res.size() * static_cast<size_t>(B));
  for (size_t i = 0; i < data_res.size(); ++i)
    for (int64_t b = 0; b < B; ++b)
      out[i * static_cast<size_t>(B) + static_cast<size_t>(b)] =
          llr_grid[static_cast<int64_t>(data_res[i]) * B + b];
  return out;
}

struct PointRunner {
  LinkContext& ctx;
  const NeuralReceiverSet& neural;
  ReceiverKind kind;
  CodeRate cr;
  double ebno_db;
  uint64_t seed;
  const LdpcCode& code;

  bool block_errored(int64_t idx) const {
    Rng rng(seed, {stream::kEval, static_cast<uint64_t>(cr.milli), ebno_key(ebno_db),
                   static_cast<uint64_t>(idx)});
    BlockSample s = simulate_block(ctx, cr, ebno_db, rng);

    std::vector<double> llrs;
    switch (kind) {
      case ReceiverKind::BaselinePerfectCsi: {
        const auto mrc = mrc_demap(s.rx, perfect_csi(s.chan), ctx.grid, ctx.qam, s.n0);
        llrs = data_llrs_from_grid(mrc.llrs, ctx.data_res);
        break;
      }
      case ReceiverKind::BaselineLs: {
        const auto mrc =
            mrc_demap(s.rx, ls_estimate(s.rx, ctx.grid), ctx.grid, ctx.qam, s.n0);
        llrs = data_llrs_from_grid(mrc.llrs, ctx.data_res);
        break;
      }
      case ReceiverKind::NeuralBase: {
        const Tensor feat = build_input_features(s.rx, s.n0, *neural.cfg);
        const Tensor out = forward_base(feat, *neural.cfg, *neural.base);
        llrs = data_llrs_from_grid(out, ctx.data_res);
        break;
      }
      case ReceiverKind::Loren: {
        const Tensor feat = build_input_features(s.rx, s.n0, *neural.cfg);
        const Tensor out = forward_loren(feat, *neural.cfg, *neural.base, *neural.registry);
        llrs = data_llrs_from_grid(out, ctx.data_res);
        break;
      }
    }

    const auto decoded = code.decode_bp(llrs, ctx.ldpc_max_iters);
    for (int i = 0; i < code.k(); ++i)
      if (decoded.bits[static_cast<size_t>(i)] != s.info[static_cast<size_t>(i)]) return true;
    return false;
  }
};

}  // namespace

BlerPoint run_bler_point(LinkContext& ctx, const NeuralReceiverSet& neural,
                         ReceiverKind kind, CodeRate cr, double ebno_db,
                         const StoppingRule& stop, uint64_t seed, int workers) {
  if (stop.min_block_errors < 1) throw ConfigError("stopping rule: min_block_errors < 1");
  if (stop.max_blocks < 1) throw ConfigError("stopping rule: max_blocks < 1");
  if (workers < 1) throw ConfigError("workers must be at least 1");

  const bool is_neural = kind == ReceiverKind::NeuralBase || kind == ReceiverKind::Loren;
  if (is_neural && (!neural.cfg || !neural.base))
    throw MissingArtifactError("neural receiver requested without loaded weights");
  if (kind == ReceiverKind::Loren) {
    if (!neural.registry || !neural.registry->has(cr.milli))
      throw MissingArtifactError("no adapter registered for code rate " +
                                 format_double(cr.display()));
    neural.registry->switch_cr(cr.milli);
  }

  const LdpcCode& code = ctx.code_for(cr);  // built before workers spawn
  PointRunner runner{ctx, neural, kind, cr, ebno_db, seed, code};

  BlerPoint point;
  point.receiver = receiver_label(kind);
  point.cr = cr;
  point.ebno_db = ebno_db;
  point.seed = seed;

  // Blocks are evaluated in index chunks; the stopping rule folds over flags
  // strictly in index order, so the outcome never depends on thread timing.
  const int64_t chunk = static_cast<int64_t>(std::max(workers, 1)) * 8;
  std::vector<uint8_t> flags(static_cast<size_t>(chunk));
  int64_t next_base = 0;
  bool done = false;
  while (!done && next_base < stop.max_blocks) {
    const int64_t count = std::min<int64_t>(chunk, stop.max_blocks - next_base);
    if (workers <= 1) {
      for (int64_t j = 0; j < count; ++j)
        flags[static_cast<size_t>(j)] = runner.block_errored(next_base + j) ? 1 : 0;
    } else {
      std::atomic<int64_t> cursor{0};
      std::vector<std::thread> pool;
      pool.reserve(static_cast<size_t>(workers));
      for (int w = 0; w < workers; ++w) {
        pool.emplace_back([&] {
          for (int64_t j = cursor.fetch_add(1); j < count; j = cursor.fetch_add(1))
            flags[static_cast<size_t>(j)] = runner.block_errored(next_base + j) ? 1 : 0;
        });
      }
      for (auto& th : pool) th.join();
    }
    for (int64_t j = 0; j < count; ++j) {
      ++point.blocks;
      point.errors += flags[static_cast<size_t>(j)];
      if (point.errors >= stop.min_block_errors || point.blocks >= stop.max_blocks) {
        done = true;
        break;
      }
    }
    next_base += count;
  }

  point.bler = static_cast<double>(point.errors) / static_cast<double>(point.blocks);
  const auto ci = wilson95(point.errors, point.blocks);
  point.ci_lo = ci.lo;
  point.ci_hi = ci.hi;
  return point;
}

std::vector<BlerPoint> sweep(LinkContext& ctx, const NeuralReceiverSet& neural,
                             const SweepConfig& cfg) {
  if (cfg.receivers.empty()) throw ConfigError("sweep: no receivers requested");
  if (cfg.crs.empty()) throw ConfigError("sweep: no code rates requested");
  if (cfg.ebno_points_db.empty()) throw ConfigError("sweep: no Eb/N0 points requested");
  std::vector<BlerPoint> points;
  for (ReceiverKind kind : cfg.receivers)
    for (const CodeRate& cr : cfg.crs)
      for (double ebno : cfg.ebno_points_db)
        points.push_back(
            run_bler_point(ctx, neural, kind, cr, ebno, cfg.stop, cfg.seed, cfg.workers));
  return points;
}

void write_bler_csv(const std::string& path, const std::vector<BlerPoint>& points) {
  std::string text = "receiver,cr,ebno_db,blocks,errors,bler,ci_lo,ci_hi,seed\n";
  for (const auto& p : points) {
    text += p.receiver;
    text += ',';
    text += format_double(p.cr.display());
    text += ',';
    text += format_double(p.ebno_db);
    text += ',';
    text += std::to_string(p.blocks);
    text += ',';
    text += std::to_string(p.errors);
    text += ',';
    text += format_double(p.bler);
    text += ',';
    text += format_double(p.ci_lo);
    text += ',';
    text += format_double(p.ci_hi);
    text += ',';
    text += std::to_string(p.seed);
    text += '\n';
  }
  write_text_file(path, text);
}

std::vector<BlerPoint> parse_bler_csv(const std::string& text) {
  std::vector<BlerPoint> points;
  size_t pos = 0;
  bool first = true;
  while (pos < text.size()) {
    size_t end = text.find('\n', pos);
    if (end == std::string::npos) end = text.size();
    const std::string line = text.substr(pos, end - pos);
    pos = end + 1;
    if (line.empty()) continue;
    const auto fields = split_csv_line(line);
    if (first) {
      if (line != "receiver,cr,ebno_db,blocks,errors,bler,ci_lo,ci_hi,seed")
        throw IoError("unexpected BLER CSV header: " + line);
      first = false;
      continue;
    }
    if (fields.size() != 9) throw IoError("bad BLER CSV row: " + line);
    BlerPoint p;
    p.receiver = fields[0];
    receiver_from_label(p.receiver);  // validates
    p.cr = CodeRate::from_double(parse_double(fields[1]));
    p.ebno_db = parse_double(fields[2]);
    p.blocks = parse_int64(fields[3]);
    p.errors = parse_int64(fields[4]);
    p.bler = parse_double(fields[5]);
    p.ci_lo = parse_double(fields[6]);
    p.ci_hi = parse_double(fields[7]);
    p.seed = parse_uint64(fields[8]);
    points.push_back(std::move(p));
  }
  if (first) throw IoError("empty BLER CSV");
  return points;
}

std::vector<BlerPoint> read_bler_csv(const std::string& path) {
  return parse_bler_csv(read_text_file(path));
}

CompareReport compare_report(const std::vector<BlerPoint>& points) {
  if (points.empty()) throw ConfigError("compare_report: no points");

  using GridKey = std::pair<int, int64_t>;  // (cr milli, ebno in millidB)
  std::map<std::string, std::set<GridKey>> grids;
  std::map<GridKey, std::vector<const BlerPoint*>> groups;
  for (const auto& p : points) {
    const GridKey key{p.cr.milli, static_cast<int64_t>(std::llround(p.ebno_db * 1000.0))};
    grids[p.receiver].insert(key);
    groups[key].push_back(&p);
  }
  const auto& reference = grids.begin()->second;
  for (const auto& [receiver, grid] : grids)
    if (grid != reference)
      throw ConfigError("compare_report: receiver '" + receiver +
                        "' covers a different (cr, ebno) grid");

  CompareReport report;
  for (const auto& [key, group] : groups) {
    ComparePoint cp;
    cp.cr = group.front()->cr;
    cp.ebno_db = group.front()->ebno_db;
    double loren = -1.0, ls = -1.0;
    for (const BlerPoint* p : group) {
      cp.ranked.push_back({p->receiver, p->bler, p->ci_lo, p->ci_hi});
      if (p->receiver == "loren") loren = p->bler;
      if (p->receiver == "baseline-ls") ls = p->bler;
    }
    std::stable_sort(cp.ranked.begin(), cp.ranked.end(),
                     [](const CompareEntry& a, const CompareEntry& b) {
                       if (a.bler != b.bler) return a.bler < b.bler;
                       return a.receiver < b.receiver;
                     });
    cp.has_loren_and_ls = loren >= 0.0 && ls >= 0.0;
    cp.loren_not_worse = cp.has_loren_and_ls && loren <= ls;
    report.points.push_back(std::move(cp));
  }
  return report;
}

std::string CompareReport::render() const {
  std::string out;
  for (const auto& cp : points) {
    out += "cr=" + format_double(cp.cr.display()) +
           " ebno_db=" + format_double(cp.ebno_db) + ":";
    for (const auto& e : cp.ranked) {
      out += "  " + e.receiver + "=" + format_double(e.bler) + " [" +
             format_double(e.ci_lo) + "," + format_double(e.ci_hi) + "]";
    }
    if (cp.has_loren_and_ls)
      out += cp.loren_not_worse ? "  (loren <= ls)" : "  (loren > ls)";
    out += '\n';
  }
  return out;
}

}  // namespace loren
