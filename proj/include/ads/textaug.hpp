#pragma once

#include <optional>
#include <string>
#include <vector>

#include "ads/corpus.hpp"
#include "ads/rng.hpp"

namespace ads::textaug {

using corpus::TagCategory;
using corpus::TagMap;
using corpus::TagVocabulary;
using corpus::Track;

// One synthesized caption plus the tag subset it was rendered from
// (provenance for swapping and audit).
struct CaptionView {
    std::string text;
    TagMap source_tags;
    int view_index = 0;
};

struct Swap {
    TagCategory category;
    std::string original;
    std::string replacement;
};

struct SwapResult {
    std::string text;
    std::vector<Swap> swaps;
    // categories whose vocabulary is too small to swap (< 2 descriptors);
    // skipped with a recorded warning rather than an error
    std::vector<TagCategory> skipped;
};

struct AugmentConfig {
    int k_views = 10;
    double p_cap = 0.5;
    // false renders a single view from all tags (no subset sampling)
    bool view_dropout = true;
    double swap_max_prob = 0.15;
    int swap_warmup_epochs = 5;
    int swap_ramp_epochs = 20;
    std::string grammar_id = "T1";
    std::string grammar_path;  // empty = built-in grammar
    uint64_t seed = 0;

    void validate() const;
};

// Fixed, versioned surface templates. Slots: {n} article suffix, {mood},
// {genre}, {instruments}; an outer {...} group wrapping a slot is omitted
// when that slot's category is empty.
struct Template {
    std::string id;
    std::string pattern;
};

struct Grammar {
    std::string id;
    std::vector<Template> templates;

    static Grammar builtin();
    static Grammar load(const std::string& path);
};

std::string render_template(const Template& tmpl, const TagMap& tag_subset);

// Renders a grammatical sentence embedding every descriptor of the subset
// verbatim. Same (subset, rng state) -> same string.
std::string tag_to_caption(const TagMap& tag_subset, const Grammar& grammar, Rng& rng);

// Up to k distinct views; every non-empty category contributes at least
// one descriptor to every view. Duplicate captions are resampled, so the
// result only falls short of k when the track cannot produce k different
// texts.
std::vector<CaptionView> generate_views(const Track& track, int k, const Grammar& grammar,
                                        Rng& rng);

// Caption views for a track: stored captions when present (source tags
// recovered by boundary-aware descriptor scan), generated from the track's
// tags otherwise, with a per-track derived seed.
std::vector<CaptionView> views_for_track(const Track& track, const TagVocabulary& vocab,
                                         const AugmentConfig& cfg, const Grammar& grammar);

// Comma-joined descriptors in category order genre, mood, instrument.
std::string render_tag_string(const Track& track);

// Caption view with probability p_cap, tag string otherwise. The tag-string
// case is returned as a pseudo-view carrying all tags so swaps stay
// possible downstream.
CaptionView sample_text_view(const Track& track, const std::vector<CaptionView>& views,
                             double p_cap, Rng& rng);
std::string sample_text_input(const Track& track, const std::vector<CaptionView>& views,
                              double p_cap, Rng& rng);

// For each category present in the view's source tags, replaces one
// uniformly chosen rendered descriptor with a different descriptor of the
// same category, by verbatim token-span substitution.
SwapResult text_swap(const CaptionView& view, const TagVocabulary& vocab, Rng& rng);

// Curriculum: 0 during warm-up, then a linear ramp to swap_max_prob over
// swap_ramp_epochs. Epochs are 0-indexed completed epochs.
double swap_probability(int epoch, const AugmentConfig& cfg);

struct HardNegative {
    int slot = -1;  // negative slot index j != i in the batch
    SwapResult swap;
};

// Per-anchor hard-negative plans: each negative slot is independently
// selected with probability swap_probability(epoch); each selected slot
// receives an independent swap of the anchor's own view. Consumed by the
// trainer, which substitutes projections row-wise in the similarity matrix.
std::vector<std::vector<HardNegative>> build_batch_hard_negatives(
    const std::vector<CaptionView>& anchor_views, int epoch, const AugmentConfig& cfg,
    const TagVocabulary& vocab, Rng& rng);

// Boundary-aware first occurrence of a descriptor in text (token span, not
// bare substring). Exposed for tests.
std::optional<size_t> find_token_span(const std::string& text, const std::string& word);

}  // namespace ads::textaug
