#include "rankrl/data.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <fstream>
#include <numeric>
#include <sstream>
#include <stdexcept>

#include "rankrl/parallel.hpp"

namespace rankrl {

namespace {

std::string fmt17(double v) {
  char buf[40];
  std::snprintf(buf, sizeof(buf), "%.17g", v);
  return buf;
}

[[noreturn]] void parse_fail(const std::filesystem::path& p, std::size_t line, const std::string& what) {
  throw std::runtime_error(p.string() + ":" + std::to_string(line) + ": " + what);
}

std::string signal_kind_name(SignalKind k) {
  return k == SignalKind::WatchRatio ? "watch_ratio" : "rating";
}

SignalKind parse_signal_kind(const std::string& s, const std::filesystem::path& p, std::size_t line) {
  if (s == "watch_ratio") return SignalKind::WatchRatio;
  if (s == "rating") return SignalKind::Rating;
  parse_fail(p, line, "unknown signal_kind '" + s + "'");
}

double dot(std::span<const double> a, std::span<const double> b) {
  double s = 0.0;
  for (std::size_t i = 0; i < a.size(); ++i) s += a[i] * b[i];
  return s;
}

}  // namespace

std::vector<UserId> InteractionLog::users() const {
  std::vector<UserId> out;
  out.reserve(records.size());
  for (const auto& r : records) out.push_back(r.user);
  std::sort(out.begin(), out.end());
  out.erase(std::unique(out.begin(), out.end()), out.end());
  return out;
}

std::vector<ItemId> InteractionLog::items() const {
  std::vector<ItemId> out;
  out.reserve(records.size());
  for (const auto& r : records) out.push_back(r.item);
  std::sort(out.begin(), out.end());
  out.erase(std::unique(out.begin(), out.end()), out.end());
  return out;
}

void EmbeddingTable::insert(ItemId id, std::vector<double> v) {
  if (dim_ == 0) dim_ = static_cast<int>(v.size());
  if (static_cast<int>(v.size()) != dim_)
    throw std::invalid_argument("EmbeddingTable: dimension mismatch for item " + std::to_string(id));
  if (index_.count(id)) throw std::invalid_argument("EmbeddingTable: duplicate item " + std::to_string(id));
  double norm2 = 0.0;
  for (double x : v) norm2 += x * x;
  if (!(norm2 > 0.0)) throw std::invalid_argument("EmbeddingTable: zero vector for item " + std::to_string(id));
  const double inv = 1.0 / std::sqrt(norm2);
  for (double& x : v) x *= inv;

  index_[id] = ids_.size();
  ids_.push_back(id);
  flat_.insert(flat_.end(), v.begin(), v.end());
  // keep ids() ascending without reshuffling storage
  if (ids_.size() > 1 && ids_[ids_.size() - 2] > id) {
    std::sort(ids_.begin(), ids_.end());
  }
}

bool EmbeddingTable::contains(ItemId id) const { return index_.count(id) > 0; }

std::span<const double> EmbeddingTable::vec(ItemId id) const {
  auto it = index_.find(id);
  if (it == index_.end())
    throw std::out_of_range("EmbeddingTable: missing embedding for item " + std::to_string(id));
  return {flat_.data() + it->second * dim_, static_cast<std::size_t>(dim_)};
}

void save_interaction_log(const std::filesystem::path& p, const InteractionLog& log) {
  std::ofstream f(p);
  if (!f) throw std::runtime_error("cannot open for write: " + p.string());
  f << "user_id,item_id,timestamp,signal_kind,signal_value\n";
  for (const auto& r : log.records) {
    f << r.user << ',' << r.item << ',' << r.timestamp << ',' << signal_kind_name(r.kind) << ','
      << fmt17(r.value) << '\n';
  }
}

InteractionLog load_interaction_log(const std::filesystem::path& p) {
  std::ifstream f(p);
  if (!f) throw std::runtime_error("cannot open: " + p.string());
  std::string line;
  if (!std::getline(f, line)) throw std::runtime_error(p.string() + ": empty file");
  if (line != "user_id,item_id,timestamp,signal_kind,signal_value")
    parse_fail(p, 1, "bad header '" + line + "'");

  InteractionLog log;
  std::size_t lineno = 1;
  while (std::getline(f, line)) {
    ++lineno;
    if (line.empty()) continue;
    std::stringstream ss(line);
    std::string field;
    std::vector<std::string> fields;
    while (std::getline(ss, field, ',')) fields.push_back(field);
    if (fields.size() != 5) parse_fail(p, lineno, "expected 5 fields, got " + std::to_string(fields.size()));
    try {
      InteractionRecord r;
      r.user = std::stoll(fields[0]);
      r.item = std::stoll(fields[1]);
      r.timestamp = std::stoll(fields[2]);
      r.kind = parse_signal_kind(fields[3], p, lineno);
      r.value = std::stod(fields[4]);
      log.records.push_back(r);
    } catch (const std::invalid_argument&) {
      parse_fail(p, lineno, "malformed row");
    } catch (const std::out_of_range&) {
      parse_fail(p, lineno, "value out of range");
    }
  }
  return log;
}

void save_embedding_table(const std::filesystem::path& p, const EmbeddingTable& t) {
  std::ofstream f(p);
  if (!f) throw std::runtime_error("cannot open for write: " + p.string());
  f << "dim=" << t.dim() << '\n';
  for (ItemId id : t.ids()) {
    f << id;
    for (double v : t.vec(id)) f << '\t' << fmt17(v);
    f << '\n';
  }
}

EmbeddingTable load_embedding_table(const std::filesystem::path& p) {
  std::ifstream f(p);
  if (!f) throw std::runtime_error("cannot open: " + p.string());
  std::string line;
  if (!std::getline(f, line) || line.rfind("dim=", 0) != 0)
    parse_fail(p, 1, "expected 'dim=<D>' header");
  const int dim = std::stoi(line.substr(4));
  if (dim <= 0) parse_fail(p, 1, "non-positive dim");

  EmbeddingTable t(dim);
  std::size_t lineno = 1;
  while (std::getline(f, line)) {
    ++lineno;
    if (line.empty()) continue;
    std::stringstream ss(line);
    std::string field;
    if (!std::getline(ss, field, '\t')) parse_fail(p, lineno, "missing item id");
    ItemId id = 0;
    std::vector<double> v;
    try {
      id = std::stoll(field);
      while (std::getline(ss, field, '\t')) v.push_back(std::stod(field));
    } catch (...) {
      parse_fail(p, lineno, "malformed row");
    }
    if (static_cast<int>(v.size()) != dim)
      parse_fail(p, lineno, "expected " + std::to_string(dim) + " values, got " + std::to_string(v.size()));
    t.insert(id, std::move(v));
  }
  return t;
}

void save_topic_map(const std::filesystem::path& p, const TopicMap& topics) {
  std::ofstream f(p);
  if (!f) throw std::runtime_error("cannot open for write: " + p.string());
  for (const auto& [id, ts] : topics) {
    f << id << '\t';
    for (std::size_t i = 0; i < ts.size(); ++i) f << (i ? "," : "") << ts[i];
    f << '\n';
  }
}

TopicMap load_topic_map(const std::filesystem::path& p) {
  std::ifstream f(p);
  if (!f) throw std::runtime_error("cannot open: " + p.string());
  TopicMap topics;
  std::string line;
  std::size_t lineno = 0;
  while (std::getline(f, line)) {
    ++lineno;
    if (line.empty()) continue;
    const auto tab = line.find('\t');
    if (tab == std::string::npos) parse_fail(p, lineno, "expected item<TAB>topics");
    ItemId id = 0;
    try {
      id = std::stoll(line.substr(0, tab));
    } catch (...) {
      parse_fail(p, lineno, "malformed item id");
    }
    std::vector<std::string> ts;
    std::stringstream ss(line.substr(tab + 1));
    std::string topic;
    while (std::getline(ss, topic, ',')) {
      if (!topic.empty()) ts.push_back(topic);
    }
    topics[id] = std::move(ts);
  }
  return topics;
}

InteractionLog subsample_per_user(const InteractionLog& log, double fraction, std::uint64_t seed) {
  if (!(fraction > 0.0 && fraction <= 1.0))
    throw std::invalid_argument("subsample_per_user: fraction must be in (0,1]");
  if (fraction == 1.0) return log;

  std::map<UserId, std::vector<std::size_t>> by_user;
  for (std::size_t i = 0; i < log.records.size(); ++i) by_user[log.records[i].user].push_back(i);

  std::vector<std::size_t> kept;
  for (auto& [user, idx] : by_user) {
    const std::size_t n = idx.size();
    const std::size_t keep = static_cast<std::size_t>(
        std::ceil(fraction * static_cast<double>(n)));
    Rng rng(mix64(seed, static_cast<std::uint64_t>(user)));
    rng.shuffle(idx);
    for (std::size_t i = 0; i < keep; ++i) kept.push_back(idx[i]);
  }
  std::sort(kept.begin(), kept.end());
  InteractionLog out;
  out.records.reserve(kept.size());
  for (std::size_t i : kept) out.records.push_back(log.records[i]);
  return out;
}

UserSplit split_users(const InteractionLog& log, double train_ratio, double val_ratio,
                      double test_ratio, std::uint64_t seed) {
  const double total = train_ratio + val_ratio + test_ratio;
  if (!(total > 0.0)) throw std::invalid_argument("split_users: ratios must sum to > 0");

  std::vector<UserId> users = log.users();
  Rng rng(mix64(seed, 0x5b117ULL));
  rng.shuffle(users);

  const std::size_t n = users.size();
  const std::size_t n_train = static_cast<std::size_t>(std::floor(train_ratio / total * n));
  const std::size_t n_val = static_cast<std::size_t>(std::floor(val_ratio / total * n));
  UserSplit out;
  out.train.assign(users.begin(), users.begin() + n_train);
  out.val.assign(users.begin() + n_train, users.begin() + n_train + n_val);
  out.test.assign(users.begin() + n_train + n_val, users.end());
  std::sort(out.train.begin(), out.train.end());
  std::sort(out.val.begin(), out.val.end());
  std::sort(out.test.begin(), out.test.end());
  return out;
}

InteractionLog filter_log(const InteractionLog& log, const std::vector<UserId>& users) {
  std::set<UserId> keep(users.begin(), users.end());
  InteractionLog out;
  for (const auto& r : log.records)
    if (keep.count(r.user)) out.records.push_back(r);
  return out;
}

std::vector<double> query_embedding(std::span<const Interaction> history,
                                    const EmbeddingTable& emb, std::size_t recent_h,
                                    double discount, bool signal_weighting) {
  std::vector<double> q(emb.dim(), 0.0);
  if (history.empty()) return q;
  const std::size_t h = std::min(recent_h, history.size());
  const std::size_t start = history.size() - h;
  for (std::size_t t = 0; t < h; ++t) {
    const Interaction& rec = history[start + t];
    // most recent entry gets discount^0
    const double decay = std::pow(discount, static_cast<double>(h - 1 - t));
    const double w = signal_weighting ? rec.signal : 1.0;
    const auto e = emb.vec(rec.item);
    for (int d = 0; d < emb.dim(); ++d) q[d] += decay * w * e[d];
  }
  double norm2 = 0.0;
  for (double x : q) norm2 += x * x;
  if (norm2 > 0.0) {
    const double inv = 1.0 / std::sqrt(norm2);
    for (double& x : q) x *= inv;
  }
  return q;
}

std::vector<ItemId> retrieve_candidates(std::span<const Interaction> history,
                                        const EmbeddingTable& emb, std::size_t recent_h,
                                        std::size_t n_candidates, double discount,
                                        bool signal_weighting) {
  if (history.empty()) throw std::invalid_argument("retrieve_candidates: empty history");
  const std::vector<double> q = query_embedding(history, emb, recent_h, discount, signal_weighting);

  std::set<ItemId> exclude;
  for (const auto& rec : history) exclude.insert(rec.item);

  std::vector<std::pair<double, ItemId>> scored;
  scored.reserve(emb.size());
  for (ItemId id : emb.ids()) {
    if (exclude.count(id)) continue;
    scored.emplace_back(dot(q, emb.vec(id)), id);
  }
  if (scored.size() < n_candidates)
    throw std::runtime_error("retrieve_candidates: catalog too small after exclusion");

  // descending score, ties by ascending item id
  std::sort(scored.begin(), scored.end(), [](const auto& a, const auto& b) {
    if (a.first != b.first) return a.first > b.first;
    return a.second < b.second;
  });
  std::vector<ItemId> out;
  out.reserve(n_candidates);
  for (std::size_t i = 0; i < n_candidates; ++i) out.push_back(scored[i].second);
  return out;
}

double SyntheticTruth::true_engagement(UserId u, ItemId i) const {
  const auto ui = std::lower_bound(user_ids.begin(), user_ids.end(), u);
  const auto ii = std::lower_bound(item_ids.begin(), item_ids.end(), i);
  if (ui == user_ids.end() || *ui != u) throw std::out_of_range("SyntheticTruth: unknown user");
  if (ii == item_ids.end() || *ii != i) throw std::out_of_range("SyntheticTruth: unknown item");
  const std::size_t ur = ui - user_ids.begin();
  const std::size_t ir = ii - item_ids.begin();
  double d = 0.0;
  for (int k = 0; k < latent_dim; ++k)
    d += user_latents[ur * latent_dim + k] * item_latents[ir * latent_dim + k];
  return 1.0 + std::tanh(d);
}

double SyntheticTruth::noise_std(ItemId i) const {
  return noise_base + noise_hetero * noise_feature.at(i);
}

namespace {

std::vector<double> random_unit_vector(int dim, Rng& rng) {
  std::vector<double> v(dim);
  double norm2 = 0.0;
  do {
    norm2 = 0.0;
    for (int d = 0; d < dim; ++d) {
      v[d] = rng.normal();
      norm2 += v[d] * v[d];
    }
  } while (!(norm2 > 1e-12));
  const double inv = 1.0 / std::sqrt(norm2);
  for (double& x : v) x *= inv;
  return v;
}

// small fixed-iteration k-means over item latents; topic = cluster label
std::vector<int> cluster_topics(const std::vector<double>& latents, std::size_t n, int dim,
                                int n_clusters, Rng& rng) {
  std::vector<int> assign(n, 0);
  if (n_clusters <= 1) return assign;
  std::vector<double> centers(static_cast<std::size_t>(n_clusters) * dim);
  for (int c = 0; c < n_clusters; ++c) {
    const std::size_t pick = rng.uniform_below(n);
    std::copy(latents.begin() + pick * dim, latents.begin() + (pick + 1) * dim,
              centers.begin() + static_cast<std::size_t>(c) * dim);
  }
  for (int iter = 0; iter < 10; ++iter) {
    for (std::size_t i = 0; i < n; ++i) {
      double best = -1e300;
      int best_c = 0;
      for (int c = 0; c < n_clusters; ++c) {
        double d = 0.0;
        for (int k = 0; k < dim; ++k)
          d += latents[i * dim + k] * centers[static_cast<std::size_t>(c) * dim + k];
        if (d > best) {
          best = d;
          best_c = c;
        }
      }
      assign[i] = best_c;
    }
    std::vector<double> sums(static_cast<std::size_t>(n_clusters) * dim, 0.0);
    std::vector<int> counts(n_clusters, 0);
    for (std::size_t i = 0; i < n; ++i) {
      ++counts[assign[i]];
      for (int k = 0; k < dim; ++k)
        sums[static_cast<std::size_t>(assign[i]) * dim + k] += latents[i * dim + k];
    }
    for (int c = 0; c < n_clusters; ++c) {
      if (counts[c] == 0) continue;
      double norm2 = 0.0;
      for (int k = 0; k < dim; ++k) {
        const double v = sums[static_cast<std::size_t>(c) * dim + k] / counts[c];
        centers[static_cast<std::size_t>(c) * dim + k] = v;
        norm2 += v * v;
      }
      if (norm2 > 0.0) {
        const double inv = 1.0 / std::sqrt(norm2);
        for (int k = 0; k < dim; ++k) centers[static_cast<std::size_t>(c) * dim + k] *= inv;
      }
    }
  }
  return assign;
}

}  // namespace

SyntheticData generate_synthetic(const SyntheticConfig& cfg) {
  if (cfg.n_users <= 0 || cfg.n_items <= 0 || cfg.latent_dim <= 0)
    throw std::invalid_argument("generate_synthetic: sizes must be positive");
  if (!(cfg.sparsity > 0.0 && cfg.sparsity <= 1.0))
    throw std::invalid_argument("generate_synthetic: sparsity must be in (0,1]");
  if (cfg.noise_base < 0.0 || cfg.noise_hetero < 0.0)
    throw std::invalid_argument("generate_synthetic: noise must be nonnegative");

  SyntheticData data;
  SyntheticTruth& truth = data.truth;
  truth.latent_dim = cfg.latent_dim;
  truth.noise_base = cfg.noise_base;
  truth.noise_hetero = cfg.noise_hetero;

  Rng master(mix64(cfg.seed, 0x57a7eULL));
  for (int u = 0; u < cfg.n_users; ++u) truth.user_ids.push_back(u + 1);
  for (int i = 0; i < cfg.n_items; ++i) truth.item_ids.push_back(i + 1);

  truth.user_latents.resize(static_cast<std::size_t>(cfg.n_users) * cfg.latent_dim);
  truth.item_latents.resize(static_cast<std::size_t>(cfg.n_items) * cfg.latent_dim);
  for (int u = 0; u < cfg.n_users; ++u) {
    Rng r = master.fork(mix64(1, u));
    const auto v = random_unit_vector(cfg.latent_dim, r);
    std::copy(v.begin(), v.end(), truth.user_latents.begin() + static_cast<std::size_t>(u) * cfg.latent_dim);
  }
  for (int i = 0; i < cfg.n_items; ++i) {
    Rng r = master.fork(mix64(2, i));
    const auto v = random_unit_vector(cfg.latent_dim, r);
    std::copy(v.begin(), v.end(), truth.item_latents.begin() + static_cast<std::size_t>(i) * cfg.latent_dim);
    // noise feature: first latent coordinate rescaled to [0, 1]
    truth.noise_feature[truth.item_ids[i]] = 0.5 * (v[0] + 1.0);
  }

  // exported embeddings: latents plus small noise, unit-normalized on insert
  data.embeddings = EmbeddingTable(cfg.latent_dim);
  for (int i = 0; i < cfg.n_items; ++i) {
    Rng r = master.fork(mix64(3, i));
    std::vector<double> e(cfg.latent_dim);
    for (int k = 0; k < cfg.latent_dim; ++k)
      e[k] = truth.item_latents[static_cast<std::size_t>(i) * cfg.latent_dim + k] +
             cfg.embedding_noise * r.normal();
    data.embeddings.insert(truth.item_ids[i], std::move(e));
  }

  Rng cluster_rng = master.fork(4);
  const std::vector<int> clusters =
      cluster_topics(truth.item_latents, cfg.n_items, cfg.latent_dim,
                     std::min(cfg.n_topics, cfg.n_items), cluster_rng);
  for (int i = 0; i < cfg.n_items; ++i)
    data.topics[truth.item_ids[i]] = {"t" + std::to_string(clusters[i])};

  // observations: each (u, i) pair observed independently with prob sparsity
  for (int u = 0; u < cfg.n_users; ++u) {
    Rng r = master.fork(mix64(5, u));
    for (int i = 0; i < cfg.n_items; ++i) {
      if (r.uniform() >= cfg.sparsity) continue;
      InteractionRecord rec;
      rec.user = truth.user_ids[u];
      rec.item = truth.item_ids[i];
      rec.kind = SignalKind::WatchRatio;
      rec.timestamp = static_cast<Timestamp>(r.uniform_below(static_cast<std::size_t>(cfg.time_span)));
      const double mu = truth.true_engagement(rec.user, rec.item);
      rec.value = mu + truth.noise_std(rec.item) * r.normal();
      data.log.records.push_back(rec);
    }
  }
  std::sort(data.log.records.begin(), data.log.records.end(),
            [](const InteractionRecord& a, const InteractionRecord& b) {
              if (a.user != b.user) return a.user < b.user;
              if (a.timestamp != b.timestamp) return a.timestamp < b.timestamp;
              return a.item < b.item;
            });
  return data;
}

}  // namespace rankrl
