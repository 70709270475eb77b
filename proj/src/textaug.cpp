#include "ads/textaug.hpp"

#include <algorithm>
#include <cctype>
#include <fstream>
#include <set>

#include <json.hpp>

#include "ads/error.hpp"

namespace ads::textaug {

namespace {

bool subset_empty(const TagMap& tags) {
    for (const auto& [c, list] : tags) {
        if (!list.empty()) return false;
    }
    return true;
}

std::string join_with_and(const std::vector<std::string>& items) {
    std::string out;
    for (size_t i = 0; i < items.size(); ++i) {
        if (i > 0) out += " and ";
        out += items[i];
    }
    return out;
}

// "a", "a and b", "a, b and c"
std::string join_list(const std::vector<std::string>& items) {
    std::string out;
    for (size_t i = 0; i < items.size(); ++i) {
        if (i > 0) out += (i + 1 == items.size()) ? " and " : ", ";
        out += items[i];
    }
    return out;
}

constexpr char kArticleMarker = '\x01';

struct RenderPiece {
    std::string text;
    int slots = 0;
    int filled = 0;
};

const std::vector<std::string>* slot_descriptors(const TagMap& tags, TagCategory c) {
    auto it = tags.find(c);
    return it == tags.end() || it->second.empty() ? nullptr : &it->second;
}

RenderPiece render_pattern(const std::string& pattern, const TagMap& tags) {
    RenderPiece out;
    size_t i = 0;
    while (i < pattern.size()) {
        char ch = pattern[i];
        if (ch != '{') {
            out.text.push_back(ch);
            ++i;
            continue;
        }
        // find matching close brace (one nesting level is enough for groups)
        int depth = 0;
        size_t j = i;
        for (; j < pattern.size(); ++j) {
            if (pattern[j] == '{') ++depth;
            if (pattern[j] == '}' && --depth == 0) break;
        }
        if (j >= pattern.size()) throw ConfigError("grammar template has unbalanced braces");
        std::string inner = pattern.substr(i + 1, j - i - 1);
        i = j + 1;

        if (inner == "n") {
            out.text.push_back(kArticleMarker);
        } else if (inner == "mood" || inner == "genre" || inner == "instruments") {
            TagCategory cat = inner == "mood"    ? TagCategory::mood
                              : inner == "genre" ? TagCategory::genre
                                                 : TagCategory::instrument;
            ++out.slots;
            if (const auto* list = slot_descriptors(tags, cat)) {
                ++out.filled;
                out.text += (cat == TagCategory::instrument) ? join_list(*list)
                                                             : join_with_and(*list);
            }
        } else {
            // optional group: included only when every slot inside is filled
            RenderPiece piece = render_pattern(inner, tags);
            if (piece.slots == 0) throw ConfigError("grammar group without a slot: {" + inner + "}");
            if (piece.filled == piece.slots) out.text += piece.text;
        }
    }
    return out;
}

std::string collapse_spaces(const std::string& s) {
    std::string out;
    out.reserve(s.size());
    for (char ch : s) {
        if (ch == ' ' && !out.empty() && out.back() == ' ') continue;
        out.push_back(ch);
    }
    // trim a trailing space before punctuation left by an empty slot
    std::string fixed;
    fixed.reserve(out.size());
    for (size_t i = 0; i < out.size(); ++i) {
        if (out[i] == ' ' && i + 1 < out.size() &&
            (out[i + 1] == '.' || out[i + 1] == ',' || out[i + 1] == '!')) {
            continue;
        }
        fixed.push_back(out[i]);
    }
    return fixed;
}

bool is_vowel_letter(char ch) {
    char c = static_cast<char>(std::tolower(static_cast<unsigned char>(ch)));
    return c == 'a' || c == 'e' || c == 'i' || c == 'o' || c == 'u';
}

std::string resolve_articles(const std::string& s) {
    std::string out;
    out.reserve(s.size());
    for (size_t i = 0; i < s.size(); ++i) {
        if (s[i] != kArticleMarker) {
            out.push_back(s[i]);
            continue;
        }
        size_t k = i + 1;
        while (k < s.size() && s[k] == ' ') ++k;
        if (k < s.size() && is_vowel_letter(s[k])) out.push_back('n');
    }
    return out;
}

}  // namespace

void AugmentConfig::validate() const {
    if (p_cap < 0.0 || p_cap > 1.0) throw ConfigError("augment.p_cap must be in [0,1]");
    if (swap_max_prob < 0.0 || swap_max_prob > 1.0) {
        throw ConfigError("augment.swap_max_prob must be in [0,1]");
    }
    if (k_views < 0) throw ConfigError("augment.k_views must be >= 0");
    if (swap_warmup_epochs < 0) throw ConfigError("augment.swap_warmup_epochs must be >= 0");
    if (swap_ramp_epochs < 0) throw ConfigError("augment.swap_ramp_epochs must be >= 0");
}

Grammar Grammar::builtin() {
    Grammar g;
    g.id = "T1";
    g.templates.push_back({"T1", "A{n} {mood} {genre} track{ featuring {instruments}}."});
    return g;
}

Grammar Grammar::load(const std::string& path) {
    std::ifstream in(path);
    if (!in) throw DataError("cannot open grammar file: " + path);
    nlohmann::json doc;
    try {
        in >> doc;
    } catch (const std::exception& e) {
        throw DataError("grammar parse error in " + path + ": " + e.what());
    }
    if (!doc.is_array() || doc.empty()) {
        throw DataError("grammar must be a non-empty JSON array of templates");
    }
    Grammar g;
    for (const auto& item : doc) {
        if (!item.is_object() || !item.contains("id") || !item.contains("pattern") ||
            !item["id"].is_string() || !item["pattern"].is_string()) {
            throw DataError("grammar template needs string fields 'id' and 'pattern'");
        }
        g.templates.push_back({item["id"].get<std::string>(), item["pattern"].get<std::string>()});
    }
    g.id = g.templates[0].id;
    for (size_t i = 1; i < g.templates.size(); ++i) g.id += "+" + g.templates[i].id;
    return g;
}

std::string render_template(const Template& tmpl, const TagMap& tag_subset) {
    RenderPiece piece = render_pattern(tmpl.pattern, tag_subset);
    return resolve_articles(collapse_spaces(piece.text));
}

std::string tag_to_caption(const TagMap& tag_subset, const Grammar& grammar, Rng& rng) {
    if (subset_empty(tag_subset)) throw DataError("tag_to_caption: empty tag subset");
    if (grammar.templates.empty()) throw ConfigError("grammar has no templates");
    size_t idx = grammar.templates.size() == 1
                     ? 0
                     : static_cast<size_t>(rng.bounded(grammar.templates.size()));
    return render_template(grammar.templates[idx], tag_subset);
}

namespace {

// number of distinct category-balanced subsets, capped to keep the
// arithmetic small
long distinct_subset_bound(const Track& track, long cap) {
    long combos = 1;
    for (const auto& [c, list] : track.tags) {
        if (list.empty()) continue;
        int n = std::min<int>(static_cast<int>(list.size()), 20);
        combos *= (1L << n) - 1;
        if (combos >= cap) return cap;
    }
    return std::min(combos, cap);
}

}  // namespace

std::vector<CaptionView> generate_views(const Track& track, int k, const Grammar& grammar,
                                        Rng& rng) {
    if (!track.has_tags()) throw DataError("generate_views: track '" + track.id + "' has no tags");

    // resample duplicate captions: the target is k *different* views, or
    // every possible subset when fewer exist
    long target = distinct_subset_bound(track, k);
    long max_attempts = 200L * std::max(k, 1);

    std::vector<CaptionView> views;
    std::set<std::string> seen;
    for (long attempt = 0; attempt < max_attempts && static_cast<long>(views.size()) < target;
         ++attempt) {
        TagMap subset;
        for (TagCategory c : corpus::kCategories) {
            auto it = track.tags.find(c);
            if (it == track.tags.end() || it->second.empty()) continue;
            const auto& pool = it->second;
            // non-empty uniformly random subset: size 1..|pool|, then a
            // uniform choice of that many distinct descriptors
            size_t take = 1 + rng.bounded(pool.size());
            std::vector<size_t> idx(pool.size());
            for (size_t i = 0; i < idx.size(); ++i) idx[i] = i;
            deterministic_shuffle(idx, rng);
            idx.resize(take);
            std::sort(idx.begin(), idx.end());  // keep the track's tag order
            std::vector<std::string> chosen;
            for (size_t i : idx) chosen.push_back(pool[i]);
            subset[c] = std::move(chosen);
        }
        std::string text = tag_to_caption(subset, grammar, rng);
        if (!seen.insert(text).second) continue;  // dedup identical captions
        CaptionView view;
        view.text = std::move(text);
        view.source_tags = std::move(subset);
        view.view_index = static_cast<int>(views.size());
        views.push_back(std::move(view));
    }
    return views;
}

std::optional<size_t> find_token_span(const std::string& text, const std::string& word) {
    if (word.empty()) return std::nullopt;
    size_t pos = text.find(word);
    while (pos != std::string::npos) {
        bool left_ok = pos == 0 || !std::isalnum(static_cast<unsigned char>(text[pos - 1]));
        size_t end = pos + word.size();
        bool right_ok = end == text.size() || !std::isalnum(static_cast<unsigned char>(text[end]));
        if (left_ok && right_ok) return pos;
        pos = text.find(word, pos + 1);
    }
    return std::nullopt;
}

std::vector<CaptionView> views_for_track(const Track& track, const TagVocabulary& vocab,
                                         const AugmentConfig& cfg, const Grammar& grammar) {
    (void)vocab;
    if (!track.captions.empty()) {
        // stored captions: recover provenance by scanning for the track's
        // own descriptors as token spans
        std::vector<CaptionView> views;
        for (const std::string& caption : track.captions) {
            CaptionView view;
            view.text = caption;
            for (const auto& [c, list] : track.tags) {
                std::vector<std::string> present;
                for (const std::string& d : list) {
                    if (find_token_span(caption, d)) present.push_back(d);
                }
                if (!present.empty()) view.source_tags[c] = std::move(present);
            }
            view.view_index = static_cast<int>(views.size());
            views.push_back(std::move(view));
        }
        return views;
    }

    Rng rng(derive_seed(cfg.seed, "views", track.id));
    if (!cfg.view_dropout) {
        // no view dropout: one caption rendered from every tag
        if (!track.has_tags()) throw DataError("track '" + track.id + "' has no tags");
        CaptionView view;
        view.source_tags = track.tags;
        view.text = tag_to_caption(track.tags, grammar, rng);
        view.view_index = 0;
        return {view};
    }
    return generate_views(track, cfg.k_views, grammar, rng);
}

std::string render_tag_string(const Track& track) {
    std::string out;
    for (const std::string& d : track.all_descriptors()) {
        if (!out.empty()) out += ", ";
        out += d;
    }
    return out;
}

CaptionView sample_text_view(const Track& track, const std::vector<CaptionView>& views,
                             double p_cap, Rng& rng) {
    if (p_cap > 0.0 && views.empty()) {
        throw DataError("p_cap > 0 but track '" + track.id + "' has no caption views");
    }
    if (rng.bernoulli(p_cap)) {
        return views[static_cast<size_t>(rng.bounded(views.size()))];
    }
    CaptionView tag_view;
    tag_view.text = render_tag_string(track);
    tag_view.source_tags = track.tags;
    tag_view.view_index = -1;  // marks the tag-string input
    return tag_view;
}

std::string sample_text_input(const Track& track, const std::vector<CaptionView>& views,
                              double p_cap, Rng& rng) {
    return sample_text_view(track, views, p_cap, rng).text;
}

SwapResult text_swap(const CaptionView& view, const TagVocabulary& vocab, Rng& rng) {
    if (subset_empty(view.source_tags)) throw DataError("text_swap: view has no source tags");

    struct Planned {
        TagCategory category;
        std::string original;
        std::string replacement;
        size_t pos;
    };
    std::vector<Planned> planned;
    SwapResult result;
    result.text = view.text;

    for (const auto& [cat, rendered] : view.source_tags) {
        if (rendered.empty()) continue;
        const std::string& original =
            rendered[static_cast<size_t>(rng.bounded(rendered.size()))];
        const auto& pool = vocab.descriptors(cat);
        // count candidates != original
        size_t candidates = 0;
        for (const auto& d : pool) candidates += (d != original) ? 1 : 0;
        if (pool.size() < 2 || candidates == 0) {
            result.skipped.push_back(cat);
            continue;
        }
        size_t pick = rng.bounded(candidates);
        std::string replacement;
        for (const auto& d : pool) {
            if (d == original) continue;
            if (pick == 0) {
                replacement = d;
                break;
            }
            --pick;
        }
        auto pos = find_token_span(view.text, original);
        if (!pos) {
            throw DataError("text_swap: descriptor '" + original +
                            "' not found verbatim in caption");
        }
        planned.push_back({cat, original, replacement, *pos});
    }

    // apply right-to-left so earlier spans stay valid
    std::sort(planned.begin(), planned.end(),
              [](const Planned& a, const Planned& b) { return a.pos > b.pos; });
    for (const Planned& p : planned) {
        result.text.replace(p.pos, p.original.size(), p.replacement);
    }
    // record swaps in category order
    std::sort(planned.begin(), planned.end(), [](const Planned& a, const Planned& b) {
        return static_cast<int>(a.category) < static_cast<int>(b.category);
    });
    for (const Planned& p : planned) {
        result.swaps.push_back({p.category, p.original, p.replacement});
    }
    return result;
}

double swap_probability(int epoch, const AugmentConfig& cfg) {
    if (epoch < cfg.swap_warmup_epochs) return 0.0;
    if (cfg.swap_ramp_epochs <= 0) return cfg.swap_max_prob;
    double progress = static_cast<double>(epoch - cfg.swap_warmup_epochs) /
                      static_cast<double>(cfg.swap_ramp_epochs);
    return cfg.swap_max_prob * std::min(1.0, progress);
}

std::vector<std::vector<HardNegative>> build_batch_hard_negatives(
    const std::vector<CaptionView>& anchor_views, int epoch, const AugmentConfig& cfg,
    const TagVocabulary& vocab, Rng& rng) {
    size_t n = anchor_views.size();
    if (n < 2) throw DataError("hard negatives need a batch of at least 2");

    double p = swap_probability(epoch, cfg);
    std::vector<std::vector<HardNegative>> plan(n);
    uint64_t base = rng.next_u64();
    for (size_t i = 0; i < n; ++i) {
        if (subset_empty(anchor_views[i].source_tags)) continue;  // nothing to swap from
        Rng anchor_rng(derive_seed(base, "anchor", static_cast<uint64_t>(i)));
        for (size_t j = 0; j < n; ++j) {
            if (j == i) continue;
            if (!anchor_rng.bernoulli(p)) continue;
            plan[i].push_back(
                {static_cast<int>(j), text_swap(anchor_views[i], vocab, anchor_rng)});
        }
    }
    return plan;
}

}  // namespace ads::textaug
