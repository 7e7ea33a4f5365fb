#include "scenecast/profiling.hpp"

#include <algorithm>
#include <cctype>
#include <cmath>
#include <limits>
#include <map>
#include <numeric>
#include <set>

#include "scenecast/error.hpp"
#include "scenecast/work_pool.hpp"

namespace scenecast::profiling {

using nlohmann::json;

Corpus Corpus::from_bags(
    const std::vector<std::pair<std::string, std::vector<std::string>>>& bags) {
  Corpus c;
  std::set<std::string> vocab;
  for (const auto& [_, tokens] : bags) vocab.insert(tokens.begin(), tokens.end());
  c.vocabulary_.assign(vocab.begin(), vocab.end());
  for (const auto& [user, tokens] : bags) {
    if (tokens.empty()) continue;
    Document d;
    d.user_id = user;
    d.tokens.reserve(tokens.size());
    for (const auto& t : tokens) d.tokens.push_back(c.token_index(t));
    c.documents_.push_back(std::move(d));
  }
  return c;
}

int Corpus::token_index(std::string_view token) const {
  auto it = std::lower_bound(vocabulary_.begin(), vocabulary_.end(), token);
  if (it == vocabulary_.end() || *it != token) return -1;
  return static_cast<int>(it - vocabulary_.begin());
}

std::size_t Corpus::token_count() const {
  std::size_t n = 0;
  for (const auto& d : documents_) n += d.tokens.size();
  return n;
}

std::vector<std::pair<std::string, std::vector<std::string>>> Corpus::bags() const {
  std::vector<std::pair<std::string, std::vector<std::string>>> out;
  out.reserve(documents_.size());
  for (const auto& d : documents_) {
    std::vector<std::string> tokens;
    tokens.reserve(d.tokens.size());
    for (int t : d.tokens) tokens.push_back(vocabulary_[t]);
    out.emplace_back(d.user_id, std::move(tokens));
  }
  return out;
}

Corpus Corpus::canonical() const {
  Corpus c = *this;
  std::stable_sort(c.documents_.begin(), c.documents_.end(),
                   [](const Document& a, const Document& b) { return a.user_id < b.user_id; });
  return c;
}

Corpus build_documents(const ingest::Dataset& dataset) {
  std::map<std::string, std::vector<std::string>> bags;
  for (const auto& r : dataset.reviews) {
    const auto* v = dataset.find_venue(r.venue_id);
    if (!v) continue;
    auto& bag = bags[r.user_id];
    bag.insert(bag.end(), v->categories.begin(), v->categories.end());
  }
  std::vector<std::pair<std::string, std::vector<std::string>>> ordered(bags.begin(), bags.end());
  Corpus c = Corpus::from_bags(ordered);
  if (c.documents().empty()) throw DataError("no user has a review in the retained FSAs");
  return c;
}

std::string clean_token(std::string_view raw) {
  std::string out;
  bool pending_space = false;
  for (char ch : raw) {
    const auto c = static_cast<unsigned char>(ch);
    if (std::isspace(c)) {
      pending_space = true;
      continue;
    }
    // Multi-byte UTF-8 sequences are letters (é, ü, ...) and are kept.
    const bool keep = c >= 0x80 || std::isalpha(c);
    if (!keep) continue;
    if (pending_space && !out.empty()) out.push_back('_');
    pending_space = false;
    out.push_back(c < 0x80 ? static_cast<char>(std::tolower(c)) : ch);
  }
  return out;
}

Corpus preprocess(const Corpus& corpus) {
  std::vector<std::pair<std::string, std::vector<std::string>>> bags;
  for (const auto& [user, tokens] : corpus.bags()) {
    std::vector<std::string> cleaned;
    for (const auto& t : tokens) {
      auto c = clean_token(t);
      if (!c.empty()) cleaned.push_back(std::move(c));
    }
    if (!cleaned.empty()) bags.emplace_back(user, std::move(cleaned));
  }
  if (bags.empty()) throw DataError("preprocessing removed every document");
  return Corpus::from_bags(bags);
}

TopicModel fit_lda(const Corpus& corpus, int topics, std::uint64_t seed, int iterations,
                   const LdaPriors& priors) {
  const int V = static_cast<int>(corpus.vocabulary().size());
  const int K = topics;
  if (K < 1) throw Error("LDA needs at least one topic");
  if (iterations < 1) throw Error("LDA needs at least one iteration");
  if (K > V) {
    throw Error("LDA topic count " + std::to_string(K) + " exceeds vocabulary size " +
                std::to_string(V));
  }
  const auto& docs = corpus.documents();
  const int D = static_cast<int>(docs.size());
  const double alpha = priors.alpha > 0.0 ? priors.alpha : 50.0 / K;
  const double beta = priors.beta;
  const double vbeta = V * beta;

  Rng rng(seed);
  std::vector<std::vector<int>> z(D);
  std::vector<int> n_dk(static_cast<std::size_t>(D) * K, 0);
  std::vector<int> n_kw(static_cast<std::size_t>(K) * V, 0);
  std::vector<int> n_k(K, 0);
  for (int d = 0; d < D; ++d) {
    z[d].resize(docs[d].tokens.size());
    for (std::size_t i = 0; i < z[d].size(); ++i) {
      const int k = static_cast<int>(rng.index(K));
      const int w = docs[d].tokens[i];
      z[d][i] = k;
      ++n_dk[static_cast<std::size_t>(d) * K + k];
      ++n_kw[static_cast<std::size_t>(k) * V + w];
      ++n_k[k];
    }
  }

  std::vector<double> cumulative(K);
  for (int it = 0; it < iterations; ++it) {
    for (int d = 0; d < D; ++d) {
      int* doc_counts = &n_dk[static_cast<std::size_t>(d) * K];
      for (std::size_t i = 0; i < z[d].size(); ++i) {
        const int w = docs[d].tokens[i];
        int k = z[d][i];
        --doc_counts[k];
        --n_kw[static_cast<std::size_t>(k) * V + w];
        --n_k[k];
        double total = 0.0;
        for (int t = 0; t < K; ++t) {
          total += (doc_counts[t] + alpha) * (n_kw[static_cast<std::size_t>(t) * V + w] + beta) /
                   (n_k[t] + vbeta);
          cumulative[t] = total;
        }
        const double u = rng.uniform() * total;
        k = static_cast<int>(std::upper_bound(cumulative.begin(), cumulative.end(), u) -
                             cumulative.begin());
        if (k >= K) k = K - 1;
        z[d][i] = k;
        ++doc_counts[k];
        ++n_kw[static_cast<std::size_t>(k) * V + w];
        ++n_k[k];
      }
    }
  }

  TopicModel m;
  m.topics = K;
  m.seed = seed;
  m.iterations = iterations;
  m.alpha = alpha;
  m.beta = beta;
  m.vocabulary = corpus.vocabulary();
  m.word_topic = Matrix(K, V);
  for (int k = 0; k < K; ++k) {
    for (int w = 0; w < V; ++w) {
      m.word_topic(k, w) = (n_kw[static_cast<std::size_t>(k) * V + w] + beta) / (n_k[k] + vbeta);
    }
  }
  m.doc_topic = Matrix(D, K);
  for (int d = 0; d < D; ++d) {
    m.doc_ids.push_back(docs[d].user_id);
    const double len = static_cast<double>(docs[d].tokens.size());
    for (int k = 0; k < K; ++k) {
      m.doc_topic(d, k) = (n_dk[static_cast<std::size_t>(d) * K + k] + alpha) / (len + K * alpha);
    }
  }
  return m;
}

std::vector<int> top_words(const TopicModel& model, int topic, int n) {
  const int V = static_cast<int>(model.word_topic.cols());
  std::vector<int> idx(V);
  std::iota(idx.begin(), idx.end(), 0);
  n = std::min(n, V);
  std::partial_sort(idx.begin(), idx.begin() + n, idx.end(), [&](int a, int b) {
    const double pa = model.word_topic(topic, a);
    const double pb = model.word_topic(topic, b);
    return pa != pb ? pa > pb : a < b;
  });
  idx.resize(n);
  return idx;
}

CoherenceScore umass_coherence(const TopicModel& model, const Corpus& corpus, int top_n,
                               double epsilon) {
  if (top_n < 2) throw Error("UMass coherence needs top_n >= 2");
  if (model.vocabulary != corpus.vocabulary()) {
    throw Error("topic model vocabulary does not match the corpus");
  }
  // Sorted list of documents containing each word.
  std::vector<std::vector<int>> docs_with(corpus.vocabulary().size());
  for (std::size_t d = 0; d < corpus.documents().size(); ++d) {
    for (int w : corpus.documents()[d].tokens) {
      auto& list = docs_with[w];
      if (list.empty() || list.back() != static_cast<int>(d)) list.push_back(static_cast<int>(d));
    }
  }
  auto co_count = [&](int a, int b) {
    const auto& x = docs_with[a];
    const auto& y = docs_with[b];
    std::size_t i = 0, j = 0, n = 0;
    while (i < x.size() && j < y.size()) {
      if (x[i] < y[j]) {
        ++i;
      } else if (y[j] < x[i]) {
        ++j;
      } else {
        ++n;
        ++i;
        ++j;
      }
    }
    return static_cast<double>(n);
  };

  CoherenceScore score;
  for (int k = 0; k < model.topics; ++k) {
    const auto words = top_words(model, k, top_n);
    double c = 0.0;
    // Each lower-ranked word is conditioned on every higher-ranked one.
    for (std::size_t m = 1; m < words.size(); ++m) {
      for (std::size_t l = 0; l < m; ++l) {
        const double dl = static_cast<double>(docs_with[words[l]].size());
        if (dl == 0.0) {
          throw Error("top word '" + corpus.vocabulary()[words[l]] + "' occurs in no document");
        }
        c += std::log((co_count(words[m], words[l]) + epsilon) / dl);
      }
    }
    score.per_topic.push_back(c);
  }
  score.mean = score.per_topic.empty()
                   ? 0.0
                   : std::accumulate(score.per_topic.begin(), score.per_topic.end(), 0.0) /
                         static_cast<double>(score.per_topic.size());
  return score;
}

TopicSelection select_topic_count(const Corpus& corpus, int k_min, int k_max, std::uint64_t seed,
                                  int iterations, int top_n) {
  if (k_min < 1 || k_max < k_min) {
    throw Error("invalid topic range " + std::to_string(k_min) + ":" + std::to_string(k_max));
  }
  const Corpus canon = corpus.canonical();
  const std::size_t n = static_cast<std::size_t>(k_max - k_min + 1);
  std::vector<TopicModel> models(n);
  std::vector<double> scores(n);
  parallel_for(n, [&](std::size_t i) {
    const int k = k_min + static_cast<int>(i);
    models[i] = fit_lda(canon, k, derive_seed(seed, "lda/k=" + std::to_string(k)), iterations);
    scores[i] = umass_coherence(models[i], canon, top_n).mean;
  });
  TopicSelection sel;
  std::size_t best = 0;
  for (std::size_t i = 0; i < n; ++i) {
    sel.coherence_by_k.emplace_back(k_min + static_cast<int>(i), scores[i]);
    if (scores[i] > scores[best]) best = i;
  }
  sel.best_topics = k_min + static_cast<int>(best);
  sel.model = std::move(models[best]);
  return sel;
}

TopicEmbedding embed(const TopicModel& model) {
  return TopicEmbedding{model.doc_ids, model.doc_topic};
}

namespace {

double squared_distance(std::span<const double> a, std::span<const double> b) {
  double s = 0.0;
  for (std::size_t i = 0; i < a.size(); ++i) {
    const double d = a[i] - b[i];
    s += d * d;
  }
  return s;
}

}  // namespace

KMeansResult kmeans(const Matrix& points, int k, Rng& rng, int max_iterations) {
  const std::size_t n = points.rows();
  const std::size_t dim = points.cols();
  if (k < 1 || static_cast<std::size_t>(k) > n) {
    throw Error("k-means needs 1 <= k <= number of points");
  }
  KMeansResult res;
  res.centroids = Matrix(k, dim);

  // k-means++ seeding.
  std::vector<double> nearest(n, std::numeric_limits<double>::infinity());
  std::size_t first = rng.index(n);
  std::copy(points.row(first).begin(), points.row(first).end(), res.centroids.row(0).begin());
  for (int c = 1; c < k; ++c) {
    double total = 0.0;
    for (std::size_t i = 0; i < n; ++i) {
      nearest[i] = std::min(nearest[i], squared_distance(points.row(i), res.centroids.row(c - 1)));
      total += nearest[i];
    }
    std::size_t pick = 0;
    if (total <= 0.0) {
      pick = rng.index(n);
    } else {
      double u = rng.uniform() * total;
      for (pick = 0; pick + 1 < n; ++pick) {
        u -= nearest[pick];
        if (u < 0.0) break;
      }
    }
    std::copy(points.row(pick).begin(), points.row(pick).end(), res.centroids.row(c).begin());
  }

  res.assignment.assign(n, -1);
  std::vector<std::size_t> counts(k);
  for (int iter = 0; iter < max_iterations; ++iter) {
    bool changed = false;
    double inertia = 0.0;
    for (std::size_t i = 0; i < n; ++i) {
      int best = 0;
      double best_d = std::numeric_limits<double>::infinity();
      for (int c = 0; c < k; ++c) {
        const double d = squared_distance(points.row(i), res.centroids.row(c));
        if (d < best_d) {
          best_d = d;
          best = c;
        }
      }
      if (res.assignment[i] != best) {
        res.assignment[i] = best;
        changed = true;
      }
      inertia += best_d;
    }
    res.inertia_trace.push_back(inertia);
    res.inertia = inertia;
    if (!changed) break;
    Matrix sums(k, dim);
    std::fill(counts.begin(), counts.end(), 0);
    for (std::size_t i = 0; i < n; ++i) {
      const int c = res.assignment[i];
      ++counts[c];
      for (std::size_t j = 0; j < dim; ++j) sums(c, j) += points(i, j);
    }
    for (int c = 0; c < k; ++c) {
      if (counts[c] == 0) continue;  // empty cluster keeps its centroid
      for (std::size_t j = 0; j < dim; ++j) res.centroids(c, j) = sums(c, j) / counts[c];
    }
  }
  return res;
}

std::vector<double> silhouette_values(const Matrix& points, const std::vector<int>& assignment,
                                      int k) {
  const std::size_t n = points.rows();
  std::vector<std::size_t> sizes(k, 0);
  for (int a : assignment) ++sizes[a];
  std::vector<double> out(n, 0.0);
  std::vector<double> dist_sum(k);
  for (std::size_t i = 0; i < n; ++i) {
    const int own = assignment[i];
    if (sizes[own] <= 1) continue;
    std::fill(dist_sum.begin(), dist_sum.end(), 0.0);
    for (std::size_t j = 0; j < n; ++j) {
      if (j == i) continue;
      dist_sum[assignment[j]] += std::sqrt(squared_distance(points.row(i), points.row(j)));
    }
    const double a = dist_sum[own] / static_cast<double>(sizes[own] - 1);
    double b = std::numeric_limits<double>::infinity();
    for (int c = 0; c < k; ++c) {
      if (c == own || sizes[c] == 0) continue;
      b = std::min(b, dist_sum[c] / static_cast<double>(sizes[c]));
    }
    if (!std::isfinite(b)) continue;
    const double denom = std::max(a, b);
    out[i] = denom > 0.0 ? (b - a) / denom : 0.0;
  }
  return out;
}

double mean_silhouette(const Matrix& points, const std::vector<int>& assignment, int k) {
  const auto s = silhouette_values(points, assignment, k);
  if (s.empty()) return 0.0;
  return std::accumulate(s.begin(), s.end(), 0.0) / static_cast<double>(s.size());
}

GroupModel cluster_users(const TopicEmbedding& embedding, int k_min, int k_max, std::uint64_t seed,
                         const ClusterOptions& options) {
  const std::size_t n = embedding.probabilities.rows();
  if (n == 0) throw DataError("cannot cluster an empty embedding");
  if (k_min < 1 || k_max < k_min) {
    throw Error("invalid group range " + std::to_string(k_min) + ":" + std::to_string(k_max));
  }
  if (n < static_cast<std::size_t>(k_min) + 1) {
    throw DataError("only " + std::to_string(n) + " users; need more than k_min = " +
                    std::to_string(k_min));
  }
  k_max = std::min<int>(k_max, static_cast<int>(n) - 1);
  const Matrix& pts = embedding.probabilities;

  // Silhouette subsample (indices), fixed across k.
  std::vector<std::size_t> sample(n);
  std::iota(sample.begin(), sample.end(), 0);
  if (n > options.silhouette_sample) {
    Rng srng(derive_seed(seed, "silhouette-sample"));
    srng.shuffle(sample.begin(), sample.end());
    sample.resize(options.silhouette_sample);
    std::sort(sample.begin(), sample.end());
  }
  Matrix sample_pts(sample.size(), pts.cols());
  for (std::size_t i = 0; i < sample.size(); ++i) {
    std::copy(pts.row(sample[i]).begin(), pts.row(sample[i]).end(), sample_pts.row(i).begin());
  }

  const std::size_t nk = static_cast<std::size_t>(k_max - k_min + 1);
  std::vector<KMeansResult> fits(nk);
  std::vector<double> sil(nk);
  parallel_for(nk, [&](std::size_t i) {
    const int k = k_min + static_cast<int>(i);
    Rng rng(derive_seed(seed, "kmeans/k=" + std::to_string(k)));
    for (int r = 0; r < std::max(1, options.restarts); ++r) {
      auto fit = kmeans(pts, k, rng, options.max_iterations);
      if (r == 0 || fit.inertia < fits[i].inertia) fits[i] = std::move(fit);
    }
    std::vector<int> sample_assign(sample.size());
    for (std::size_t s = 0; s < sample.size(); ++s) sample_assign[s] = fits[i].assignment[sample[s]];
    sil[i] = mean_silhouette(sample_pts, sample_assign, k);
  });

  GroupModel g;
  std::size_t best = 0;
  for (std::size_t i = 0; i < nk; ++i) {
    g.silhouette_by_k.emplace_back(k_min + static_cast<int>(i), sil[i]);
    if (sil[i] > sil[best]) best = i;
  }
  g.k = k_min + static_cast<int>(best);
  g.centroids = fits[best].centroids;
  for (std::size_t u = 0; u < n; ++u) g.assignment[embedding.user_ids[u]] = fits[best].assignment[u];
  return g;
}

namespace {

json matrix_json(const Matrix& m) {
  json rows = json::array();
  for (std::size_t r = 0; r < m.rows(); ++r) {
    rows.push_back(std::vector<double>(m.row(r).begin(), m.row(r).end()));
  }
  return rows;
}

Matrix matrix_from_json(const json& j) {
  const std::size_t rows = j.size();
  const std::size_t cols = rows ? j[0].size() : 0;
  Matrix m(rows, cols);
  for (std::size_t r = 0; r < rows; ++r) {
    if (j[r].size() != cols) throw ParseError("ragged matrix in JSON");
    for (std::size_t c = 0; c < cols; ++c) m(r, c) = j[r][c].get<double>();
  }
  return m;
}

}  // namespace

json to_json(const TopicModel& m) {
  json j;
  j["topics"] = m.topics;
  j["seed"] = m.seed;
  j["iterations"] = m.iterations;
  j["alpha"] = m.alpha;
  j["beta"] = m.beta;
  j["vocabulary"] = m.vocabulary;
  j["word_topic"] = matrix_json(m.word_topic);
  j["doc_ids"] = m.doc_ids;
  j["doc_topic"] = matrix_json(m.doc_topic);
  return j;
}

TopicModel topic_model_from_json(const json& j) {
  TopicModel m;
  m.topics = j.at("topics").get<int>();
  m.seed = j.at("seed").get<std::uint64_t>();
  m.iterations = j.at("iterations").get<int>();
  m.alpha = j.at("alpha").get<double>();
  m.beta = j.at("beta").get<double>();
  m.vocabulary = j.at("vocabulary").get<std::vector<std::string>>();
  m.word_topic = matrix_from_json(j.at("word_topic"));
  m.doc_ids = j.at("doc_ids").get<std::vector<std::string>>();
  m.doc_topic = matrix_from_json(j.at("doc_topic"));
  return m;
}

json to_json(const GroupModel& g) {
  json j;
  j["k"] = g.k;
  j["centroids"] = matrix_json(g.centroids);
  json sil = json::array();
  for (const auto& [k, s] : g.silhouette_by_k) sil.push_back({k, s});
  j["silhouette_by_k"] = sil;
  j["assignment"] = g.assignment;
  return j;
}

GroupModel group_model_from_json(const json& j) {
  GroupModel g;
  g.k = j.at("k").get<int>();
  g.centroids = matrix_from_json(j.at("centroids"));
  for (const auto& e : j.at("silhouette_by_k")) {
    g.silhouette_by_k.emplace_back(e.at(0).get<int>(), e.at(1).get<double>());
  }
  g.assignment = j.at("assignment").get<std::map<std::string, int>>();
  for (const auto& [user, grp] : g.assignment) {
    if (grp < 0 || grp >= g.k) throw ParseError("group of user " + user + " out of range");
  }
  return g;
}

}  // namespace scenecast::profiling
