#pragma once

#include <array>
#include <cstdint>
#include <map>
#include <optional>
#include <string>
#include <string_view>
#include <vector>

#include "ads/encoders.hpp"

namespace ads::corpus {

enum class TagCategory { genre, mood, instrument };

inline constexpr std::array<TagCategory, 3> kCategories = {
    TagCategory::genre, TagCategory::mood, TagCategory::instrument};

std::string_view category_name(TagCategory c);
std::optional<TagCategory> parse_category(std::string_view name);

// Ordered descriptor lists per category; an absent key means the category
// is absent, never an empty list.
using TagMap = std::map<TagCategory, std::vector<std::string>>;

// A music item with category-structured tags and optional precomputed
// caption views (plain strings at the file level).
struct Track {
    std::string id;
    TagMap tags;
    std::vector<std::string> captions;

    bool has_tags() const;
    // Descriptors flattened in category order (genre, mood, instrument),
    // file order within a category.
    std::vector<std::string> all_descriptors() const;
};

// The swap dictionary: per-category sorted set of all known descriptors.
// Categories are disjoint; every descriptor lives in exactly one category.
struct TagVocabulary {
    std::map<TagCategory, std::vector<std::string>> categories;

    bool contains(TagCategory c, const std::string& descriptor) const;
    const std::vector<std::string>& descriptors(TagCategory c) const;
    size_t total_descriptors() const;
};

// lowercase + trim + internal-whitespace collapse
std::string normalize_tag(std::string_view raw);

TagVocabulary load_vocabulary(const std::string& path);
void save_vocabulary(const TagVocabulary& vocab, const std::string& path);
// Permissive vocabulary built from the corpus itself, for tools invoked
// without a vocabulary file.
TagVocabulary vocabulary_from_tracks(const std::vector<Track>& tracks);

std::vector<Track> load_corpus(const std::string& path, const TagVocabulary& vocab);
void write_corpus(const std::vector<Track>& tracks, const std::string& path);

struct CorpusSplit {
    std::vector<std::string> train;
    std::vector<std::string> validation;
    std::vector<std::string> test;
    uint64_t seed = 0;
    std::array<double, 3> fractions{};
};

// Deterministic shuffle + contiguous slicing; floor allocations for
// validation/test with the remainder going to train.
CorpusSplit split_corpus(const std::vector<Track>& tracks, std::array<double, 3> fractions,
                         uint64_t seed);

// Latent ground truth for synthetic corpora: one deterministic unit vector
// per descriptor; audio embedding of a track = mean of its descriptors'
// latents + Gaussian noise, replicated to `frames` frames.
struct SyntheticWorld {
    int latent_dim = 64;
    double sigma = 0.0;
    uint64_t seed = 0;
    int frames = 4;

    std::vector<double> latent(const std::string& descriptor) const;
};

struct TagCountRange {
    int min = 1;
    int max = 3;
};

struct SyntheticCorpus {
    std::vector<Track> tracks;
    std::map<std::string, encoders::EmbeddingRecord> audio;
};

SyntheticCorpus generate_synthetic_corpus(int n, const TagVocabulary& vocab,
                                          const SyntheticWorld& world,
                                          TagCountRange tags_per_category);

// Small built-in descriptor pools (real music vocabulary) used by the synth
// tool; generates numbered fallbacks past the pool size.
TagVocabulary builtin_vocabulary(int per_category);

}  // namespace ads::corpus
