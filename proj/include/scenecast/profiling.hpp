#pragma once

#include <cstdint>
#include <map>
#include <string>
#include <string_view>
#include <utility>
#include <vector>

#include <json.hpp>

#include "scenecast/ingest.hpp"
#include "scenecast/matrix.hpp"
#include "scenecast/seeding.hpp"

namespace scenecast::profiling {

/// A user as a bag of category tokens (indices into the corpus vocabulary).
struct Document {
  std::string user_id;
  std::vector<int> tokens;
};

/// Documents plus a sorted vocabulary. Every document is non-empty.
class Corpus {
 public:
  /// Builds from raw token bags; empty bags are skipped and the vocabulary is
  /// the sorted set of tokens seen.
  static Corpus from_bags(const std::vector<std::pair<std::string, std::vector<std::string>>>& bags);

  const std::vector<Document>& documents() const { return documents_; }
  const std::vector<std::string>& vocabulary() const { return vocabulary_; }
  int token_index(std::string_view token) const;
  std::size_t token_count() const;
  std::vector<std::pair<std::string, std::vector<std::string>>> bags() const;
  /// Same corpus with documents sorted by user id.
  Corpus canonical() const;

 private:
  std::vector<Document> documents_;
  std::vector<std::string> vocabulary_;
};

/// One document per reviewing user; tokens are the categories of every
/// reviewed venue, duplicates kept. Throws DataError on an empty corpus.
Corpus build_documents(const ingest::Dataset& dataset);

/// Lower-cases, strips digits and punctuation, joins words with '_'.
/// Returns an empty string when nothing survives.
std::string clean_token(std::string_view raw);

/// Applies clean_token to every token, dropping emptied tokens and documents.
Corpus preprocess(const Corpus& corpus);

struct LdaPriors {
  /// Symmetric document-topic prior; <= 0 means 50 / K.
  double alpha = 0.0;
  double beta = 0.01;
};

struct TopicModel {
  int topics = 0;
  std::uint64_t seed = 0;
  int iterations = 0;
  double alpha = 0.0;
  double beta = 0.0;
  std::vector<std::string> vocabulary;
  std::vector<std::string> doc_ids;
  Matrix word_topic;  // topics × vocabulary
  Matrix doc_topic;   // documents × topics
};

/// Collapsed Gibbs sampling; estimates come from the final sample.
TopicModel fit_lda(const Corpus& corpus, int topics, std::uint64_t seed, int iterations,
                   const LdaPriors& priors = {});

/// Indices of the n most probable words of a topic (ties → lower index).
std::vector<int> top_words(const TopicModel& model, int topic, int n);

struct CoherenceScore {
  std::vector<double> per_topic;
  double mean = 0.0;
};

/// UMass coherence against the training corpus' document frequencies.
CoherenceScore umass_coherence(const TopicModel& model, const Corpus& corpus, int top_n = 10,
                               double epsilon = 1.0);

struct TopicSelection {
  int best_topics = 0;
  std::vector<std::pair<int, double>> coherence_by_k;
  TopicModel model;
};

/// Fits K = k_min..k_max and keeps the highest mean coherence (ties → smaller K).
TopicSelection select_topic_count(const Corpus& corpus, int k_min, int k_max, std::uint64_t seed,
                                  int iterations = 1000, int top_n = 10);

struct TopicEmbedding {
  std::vector<std::string> user_ids;
  Matrix probabilities;  // users × topics
};

TopicEmbedding embed(const TopicModel& model);

struct KMeansResult {
  Matrix centroids;
  std::vector<int> assignment;
  double inertia = 0.0;
  /// Within-cluster sum of squares after each assignment step.
  std::vector<double> inertia_trace;
};

/// Lloyd's algorithm from a k-means++ seeding; stops when assignments are
/// stable or after `max_iterations`.
KMeansResult kmeans(const Matrix& points, int k, Rng& rng, int max_iterations = 300);

/// Per-point silhouette values (Euclidean). Points in singleton clusters get 0.
std::vector<double> silhouette_values(const Matrix& points, const std::vector<int>& assignment,
                                      int k);
double mean_silhouette(const Matrix& points, const std::vector<int>& assignment, int k);

struct GroupModel {
  int k = 0;
  Matrix centroids;
  std::map<std::string, int> assignment;
  std::vector<std::pair<int, double>> silhouette_by_k;
};

struct ClusterOptions {
  int restarts = 10;
  int max_iterations = 300;
  /// Silhouette is computed on a seeded subsample above this many users.
  std::size_t silhouette_sample = 4000;
};

GroupModel cluster_users(const TopicEmbedding& embedding, int k_min, int k_max, std::uint64_t seed,
                         const ClusterOptions& options = {});

nlohmann::json to_json(const TopicModel& model);
TopicModel topic_model_from_json(const nlohmann::json& j);
nlohmann::json to_json(const GroupModel& model);
GroupModel group_model_from_json(const nlohmann::json& j);

}  // namespace scenecast::profiling
