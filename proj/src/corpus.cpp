#include "ads/corpus.hpp"

#include <algorithm>
#include <cctype>
#include <cmath>
#include <fstream>
#include <set>
#include <sstream>

#include <json.hpp>

#include "ads/error.hpp"
#include "ads/rng.hpp"

namespace ads::corpus {

namespace {

using nlohmann::ordered_json;

const std::vector<std::string> kEmptyDescriptors;

std::vector<std::string> sorted_unique(std::vector<std::string> items) {
    std::sort(items.begin(), items.end());
    items.erase(std::unique(items.begin(), items.end()), items.end());
    return items;
}

}  // namespace

std::string_view category_name(TagCategory c) {
    switch (c) {
        case TagCategory::genre: return "genre";
        case TagCategory::mood: return "mood";
        case TagCategory::instrument: return "instrument";
    }
    return "?";
}

std::optional<TagCategory> parse_category(std::string_view name) {
    for (TagCategory c : kCategories) {
        if (category_name(c) == name) return c;
    }
    return std::nullopt;
}

bool Track::has_tags() const {
    for (const auto& [c, list] : tags) {
        if (!list.empty()) return true;
    }
    return false;
}

std::vector<std::string> Track::all_descriptors() const {
    std::vector<std::string> out;
    for (TagCategory c : kCategories) {
        auto it = tags.find(c);
        if (it == tags.end()) continue;
        out.insert(out.end(), it->second.begin(), it->second.end());
    }
    return out;
}

bool TagVocabulary::contains(TagCategory c, const std::string& descriptor) const {
    const auto& list = descriptors(c);
    return std::binary_search(list.begin(), list.end(), descriptor);
}

const std::vector<std::string>& TagVocabulary::descriptors(TagCategory c) const {
    auto it = categories.find(c);
    return it == categories.end() ? kEmptyDescriptors : it->second;
}

size_t TagVocabulary::total_descriptors() const {
    size_t n = 0;
    for (const auto& [c, list] : categories) n += list.size();
    return n;
}

std::string normalize_tag(std::string_view raw) {
    std::string out;
    out.reserve(raw.size());
    bool pending_space = false;
    for (char ch : raw) {
        unsigned char u = static_cast<unsigned char>(ch);
        if (std::isspace(u)) {
            pending_space = !out.empty();
            continue;
        }
        if (pending_space) {
            out.push_back(' ');
            pending_space = false;
        }
        out.push_back(static_cast<char>(std::tolower(u)));
    }
    return out;
}

TagVocabulary load_vocabulary(const std::string& path) {
    std::ifstream in(path);
    if (!in) throw DataError("cannot open vocabulary file: " + path);
    ordered_json doc;
    try {
        in >> doc;
    } catch (const std::exception& e) {
        throw DataError("vocabulary parse error in " + path + ": " + e.what());
    }
    if (!doc.is_object()) throw DataError("vocabulary must be a JSON object: " + path);

    TagVocabulary vocab;
    std::set<std::string> seen;
    for (const auto& [key, value] : doc.items()) {
        auto cat = parse_category(key);
        if (!cat) throw DataError("unknown tag category '" + key + "' in " + path);
        if (!value.is_array()) throw DataError("category '" + key + "' must be an array");
        std::vector<std::string> descriptors;
        for (const auto& item : value) {
            if (!item.is_string()) throw DataError("descriptor in '" + key + "' must be a string");
            std::string d = normalize_tag(item.get<std::string>());
            if (d.empty()) throw DataError("empty descriptor in category '" + key + "'");
            if (!seen.insert(d).second) {
                throw DataError("descriptor '" + d + "' appears in more than one category");
            }
            descriptors.push_back(std::move(d));
        }
        descriptors = sorted_unique(std::move(descriptors));
        if (descriptors.size() < 2) {
            throw DataError("category '" + key + "' needs at least 2 descriptors");
        }
        vocab.categories[*cat] = std::move(descriptors);
    }
    if (vocab.categories.empty()) throw DataError("vocabulary has no categories: " + path);
    return vocab;
}

void save_vocabulary(const TagVocabulary& vocab, const std::string& path) {
    ordered_json doc = ordered_json::object();
    for (TagCategory c : kCategories) {
        auto it = vocab.categories.find(c);
        if (it == vocab.categories.end()) continue;
        doc[std::string(category_name(c))] = it->second;
    }
    std::ofstream out(path, std::ios::trunc);
    if (!out) throw DataError("cannot write vocabulary file: " + path);
    out << doc.dump(2) << "\n";
}

TagVocabulary vocabulary_from_tracks(const std::vector<Track>& tracks) {
    std::map<TagCategory, std::vector<std::string>> collected;
    for (const Track& t : tracks) {
        for (const auto& [c, list] : t.tags) {
            collected[c].insert(collected[c].end(), list.begin(), list.end());
        }
    }
    TagVocabulary vocab;
    for (auto& [c, list] : collected) vocab.categories[c] = sorted_unique(std::move(list));
    return vocab;
}

std::vector<Track> load_corpus(const std::string& path, const TagVocabulary& vocab) {
    std::ifstream in(path);
    if (!in) throw DataError("cannot open corpus file: " + path);

    std::vector<Track> tracks;
    std::set<std::string> ids;
    std::string line;
    int line_no = 0;
    while (std::getline(in, line)) {
        ++line_no;
        if (line.find_first_not_of(" \t\r") == std::string::npos) continue;
        ordered_json rec;
        try {
            rec = ordered_json::parse(line);
        } catch (const std::exception& e) {
            throw DataError("corpus parse error, line " + std::to_string(line_no) + ": " +
                            e.what());
        }
        if (!rec.is_object()) {
            throw DataError("corpus record must be an object, line " + std::to_string(line_no));
        }

        Track track;
        if (!rec.contains("id") || !rec["id"].is_string() ||
            rec["id"].get<std::string>().empty()) {
            throw DataError("missing or empty 'id', line " + std::to_string(line_no));
        }
        track.id = rec["id"].get<std::string>();
        if (!ids.insert(track.id).second) {
            throw DataError("duplicate track id '" + track.id + "', line " +
                            std::to_string(line_no));
        }

        if (rec.contains("tags")) {
            if (!rec["tags"].is_object()) {
                throw DataError("'tags' must be an object, line " + std::to_string(line_no));
            }
            for (const auto& [key, value] : rec["tags"].items()) {
                auto cat = parse_category(key);
                if (!cat) {
                    throw DataError("unknown tag category '" + key + "', line " +
                                    std::to_string(line_no));
                }
                if (!value.is_array() || value.empty()) {
                    throw DataError("category '" + key +
                                    "' must be a non-empty array, line " +
                                    std::to_string(line_no));
                }
                std::vector<std::string> descriptors;
                for (const auto& item : value) {
                    if (!item.is_string()) {
                        throw DataError("descriptor in '" + key + "' must be a string, line " +
                                        std::to_string(line_no));
                    }
                    std::string d = normalize_tag(item.get<std::string>());
                    if (d.empty()) {
                        throw DataError("empty descriptor in category '" + key + "', line " +
                                        std::to_string(line_no));
                    }
                    if (!vocab.contains(*cat, d)) {
                        throw DataError("unknown descriptor '" + d + "' in category '" + key +
                                        "', line " + std::to_string(line_no));
                    }
                    descriptors.push_back(std::move(d));
                }
                track.tags[*cat] = std::move(descriptors);
            }
        }

        if (rec.contains("captions")) {
            if (!rec["captions"].is_array()) {
                throw DataError("'captions' must be an array, line " + std::to_string(line_no));
            }
            for (const auto& item : rec["captions"]) {
                if (!item.is_string()) {
                    throw DataError("caption must be a string, line " + std::to_string(line_no));
                }
                track.captions.push_back(item.get<std::string>());
            }
        }

        tracks.push_back(std::move(track));
    }
    return tracks;
}

void write_corpus(const std::vector<Track>& tracks, const std::string& path) {
    std::ofstream out(path, std::ios::trunc);
    if (!out) throw DataError("cannot write corpus file: " + path);
    for (const Track& t : tracks) {
        ordered_json rec;
        rec["id"] = t.id;
        ordered_json tags = ordered_json::object();
        for (TagCategory c : kCategories) {
            auto it = t.tags.find(c);
            if (it == t.tags.end()) continue;
            tags[std::string(category_name(c))] = it->second;
        }
        rec["tags"] = tags;
        if (!t.captions.empty()) rec["captions"] = t.captions;
        out << rec.dump() << "\n";
    }
}

CorpusSplit split_corpus(const std::vector<Track>& tracks, std::array<double, 3> fractions,
                         uint64_t seed) {
    double sum = fractions[0] + fractions[1] + fractions[2];
    if (fractions[0] <= 0 || fractions[1] <= 0 || fractions[2] <= 0 ||
        std::abs(sum - 1.0) > 1e-9) {
        throw ConfigError("split fractions must be positive and sum to 1");
    }
    if (tracks.size() < 3) throw DataError("need at least 3 tracks to split");

    std::vector<std::string> ids;
    ids.reserve(tracks.size());
    for (const Track& t : tracks) ids.push_back(t.id);
    Rng rng(derive_seed(seed, "corpus-split"));
    deterministic_shuffle(ids, rng);

    size_t n = ids.size();
    size_t n_val = static_cast<size_t>(std::floor(fractions[1] * static_cast<double>(n)));
    size_t n_test = static_cast<size_t>(std::floor(fractions[2] * static_cast<double>(n)));
    size_t n_train = n - n_val - n_test;  // remainder goes to train

    CorpusSplit split;
    split.seed = seed;
    split.fractions = fractions;
    split.train.assign(ids.begin(), ids.begin() + static_cast<long>(n_train));
    split.validation.assign(ids.begin() + static_cast<long>(n_train),
                            ids.begin() + static_cast<long>(n_train + n_val));
    split.test.assign(ids.begin() + static_cast<long>(n_train + n_val), ids.end());
    return split;
}

std::vector<double> SyntheticWorld::latent(const std::string& descriptor) const {
    Rng rng(derive_seed(seed, "latent", descriptor));
    std::vector<double> v(static_cast<size_t>(latent_dim));
    double norm_sq = 0.0;
    for (double& x : v) {
        x = rng.gaussian();
        norm_sq += x * x;
    }
    double inv = 1.0 / std::sqrt(norm_sq);
    for (double& x : v) x *= inv;
    return v;
}

SyntheticCorpus generate_synthetic_corpus(int n, const TagVocabulary& vocab,
                                          const SyntheticWorld& world,
                                          TagCountRange tags_per_category) {
    if (n < 1) throw ConfigError("synthetic corpus needs n >= 1");
    if (world.sigma < 0) throw ConfigError("noise sigma must be >= 0");
    if (world.latent_dim < 1 || world.frames < 1) {
        throw ConfigError("latent_dim and frames must be >= 1");
    }
    if (tags_per_category.min < 1 || tags_per_category.max < tags_per_category.min) {
        throw ConfigError("invalid tags-per-category range");
    }
    if (vocab.categories.empty()) throw DataError("empty vocabulary");
    for (const auto& [c, list] : vocab.categories) {
        if (list.empty()) {
            throw DataError("empty vocabulary category '" + std::string(category_name(c)) + "'");
        }
        if (static_cast<int>(list.size()) < tags_per_category.max) {
            throw DataError("category '" + std::string(category_name(c)) + "' has fewer than " +
                            std::to_string(tags_per_category.max) + " descriptors");
        }
    }

    SyntheticCorpus out;
    out.tracks.reserve(static_cast<size_t>(n));
    for (int i = 0; i < n; ++i) {
        Rng rng(derive_seed(world.seed, "track", static_cast<uint64_t>(i)));
        std::ostringstream id;
        id << "synth-";
        id.fill('0');
        id.width(6);
        id << i;

        Track track;
        track.id = id.str();
        for (TagCategory c : kCategories) {
            auto it = vocab.categories.find(c);
            if (it == vocab.categories.end()) continue;
            const auto& pool = it->second;
            int count = tags_per_category.min +
                        static_cast<int>(rng.bounded(static_cast<uint64_t>(
                            tags_per_category.max - tags_per_category.min + 1)));
            std::vector<size_t> indices(pool.size());
            for (size_t k = 0; k < indices.size(); ++k) indices[k] = k;
            deterministic_shuffle(indices, rng);
            std::vector<std::string> chosen;
            for (int k = 0; k < count; ++k) chosen.push_back(pool[indices[static_cast<size_t>(k)]]);
            track.tags[c] = std::move(chosen);
        }

        // audio embedding: mean of descriptor latents + noise, replicated
        std::vector<double> mean(static_cast<size_t>(world.latent_dim), 0.0);
        std::vector<std::string> descriptors = track.all_descriptors();
        for (const std::string& d : descriptors) {
            std::vector<double> lat = world.latent(d);
            for (int k = 0; k < world.latent_dim; ++k) mean[static_cast<size_t>(k)] += lat[static_cast<size_t>(k)];
        }
        for (double& x : mean) x /= static_cast<double>(descriptors.size());
        if (world.sigma > 0) {
            for (double& x : mean) x += world.sigma * rng.gaussian();
        }

        encoders::EmbeddingRecord rec;
        rec.id = track.id;
        rec.layers = 1;
        rec.frames = world.frames;
        rec.dim = world.latent_dim;
        rec.values.reserve(rec.expected_values());
        for (int f = 0; f < world.frames; ++f) {
            for (int k = 0; k < world.latent_dim; ++k) {
                rec.values.push_back(static_cast<float>(mean[static_cast<size_t>(k)]));
            }
        }
        out.audio.emplace(rec.id, std::move(rec));
        out.tracks.push_back(std::move(track));
    }
    return out;
}

TagVocabulary builtin_vocabulary(int per_category) {
    static const std::vector<std::string> kGenres = {
        "rock", "pop", "jazz", "techno", "ambient", "folk",
        "metal", "funk", "blues", "reggae", "country", "disco"};
    static const std::vector<std::string> kMoods = {
        "mellow", "energetic", "dark", "uplifting", "dreamy", "aggressive",
        "calm", "melancholic", "playful", "tense", "romantic", "triumphant"};
    static const std::vector<std::string> kInstruments = {
        "guitar", "piano", "drums", "violin", "synthesizer", "bass",
        "flute", "cello", "trumpet", "saxophone", "organ", "harp"};

    if (per_category < 2) throw ConfigError("built-in vocabulary needs >= 2 per category");
    auto take = [&](const std::vector<std::string>& pool, TagCategory c) {
        std::vector<std::string> out;
        for (int i = 0; i < per_category; ++i) {
            if (i < static_cast<int>(pool.size())) {
                out.push_back(pool[static_cast<size_t>(i)]);
            } else {
                out.push_back(std::string(category_name(c)) + std::to_string(i));
            }
        }
        return sorted_unique(std::move(out));
    };
    TagVocabulary vocab;
    vocab.categories[TagCategory::genre] = take(kGenres, TagCategory::genre);
    vocab.categories[TagCategory::mood] = take(kMoods, TagCategory::mood);
    vocab.categories[TagCategory::instrument] = take(kInstruments, TagCategory::instrument);
    return vocab;
}

}  // namespace ads::corpus
