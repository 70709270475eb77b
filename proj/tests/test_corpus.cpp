#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <fstream>
#include <set>
#include <sstream>

#include "ads/corpus.hpp"
#include "ads/error.hpp"
#include "support.hpp"

using namespace ads::corpus;
using testsupport::TempDir;

namespace {

TagVocabulary small_vocab() {
    TagVocabulary v;
    v.categories[TagCategory::genre] = {"hip-hop", "jazz", "pop", "rock"};
    v.categories[TagCategory::mood] = {"energetic", "mellow"};
    v.categories[TagCategory::instrument] = {"drums", "guitar", "piano", "strings"};
    return v;
}

void write_file(const std::string& path, const std::string& content) {
    std::ofstream out(path, std::ios::trunc);
    out << content;
}

std::string slurp(const std::string& path) {
    std::ifstream in(path, std::ios::binary);
    std::ostringstream ss;
    ss << in.rdbuf();
    return ss.str();
}

std::vector<Track> make_tracks(int n) {
    std::vector<Track> tracks;
    for (int i = 0; i < n; ++i) {
        Track t;
        t.id = "t" + std::to_string(i);
        t.tags[TagCategory::genre] = {"rock"};
        tracks.push_back(t);
    }
    return tracks;
}

}  // namespace

TEST_CASE("load_corpus parses valid records in file order") {
    TempDir dir("corpus_load");
    write_file(dir.file("c.jsonl"),
               R"({"id": "a", "tags": {"genre": ["rock"], "mood": ["mellow"]}})"
               "\n"
               R"({"id": "b", "tags": {"instrument": ["guitar", "piano"]}})"
               "\n"
               R"({"id": "c", "tags": {"genre": ["jazz"]}, "captions": ["A mellow jazz track."]})"
               "\n");
    auto tracks = load_corpus(dir.file("c.jsonl"), small_vocab());
    REQUIRE(tracks.size() == 3);
    CHECK(tracks[0].id == "a");
    CHECK(tracks[1].id == "b");
    CHECK(tracks[2].id == "c");
    CHECK(tracks[1].tags.at(TagCategory::instrument) ==
          std::vector<std::string>{"guitar", "piano"});
    CHECK(tracks[2].captions.size() == 1);
}

TEST_CASE("descriptors are lowercase-normalized on load") {
    TempDir dir("corpus_norm");
    write_file(dir.file("c.jsonl"), R"({"id": "a", "tags": {"genre": ["Pop"]}})"
                                    "\n");
    auto tracks = load_corpus(dir.file("c.jsonl"), small_vocab());
    CHECK(tracks[0].tags.at(TagCategory::genre)[0] == "pop");
}

TEST_CASE("unknown descriptor error names descriptor, category and line") {
    TempDir dir("corpus_unknown");
    write_file(dir.file("c.jsonl"),
               R"({"id": "a", "tags": {"genre": ["rock"]}})"
               "\n"
               R"({"id": "b", "tags": {"genre": ["polka"]}})"
               "\n");
    CHECK_THROWS_WITH_AS(load_corpus(dir.file("c.jsonl"), small_vocab()),
                         doctest::Contains("unknown descriptor 'polka' in category 'genre', line 2"),
                         ads::DataError);
}

TEST_CASE("corpus loader rejects malformed input") {
    TempDir dir("corpus_bad");

    SUBCASE("parse error carries line number") {
        write_file(dir.file("c.jsonl"), "{\"id\": \"a\", \"tags\": {}}\nnot json\n");
        CHECK_THROWS_WITH_AS(load_corpus(dir.file("c.jsonl"), small_vocab()),
                             doctest::Contains("line 2"), ads::DataError);
    }

    SUBCASE("duplicate id") {
        write_file(dir.file("c.jsonl"),
                   R"({"id": "a", "tags": {"genre": ["rock"]}})"
                   "\n"
                   R"({"id": "a", "tags": {"genre": ["pop"]}})"
                   "\n");
        CHECK_THROWS_WITH_AS(load_corpus(dir.file("c.jsonl"), small_vocab()),
                             doctest::Contains("duplicate track id 'a'"), ads::DataError);
    }

    SUBCASE("category mapping to empty list") {
        write_file(dir.file("c.jsonl"), R"({"id": "a", "tags": {"genre": []}})"
                                        "\n");
        CHECK_THROWS_AS(load_corpus(dir.file("c.jsonl"), small_vocab()), ads::DataError);
    }
}

TEST_CASE("corpus write/load round-trip preserves records") {
    TempDir dir("corpus_rt");
    std::vector<Track> tracks;
    Track a;
    a.id = "a";
    a.tags[TagCategory::genre] = {"rock", "pop"};
    a.tags[TagCategory::instrument] = {"guitar"};
    a.captions = {"An energetic rock track featuring guitar."};
    tracks.push_back(a);
    Track b;
    b.id = "b";
    b.tags[TagCategory::mood] = {"mellow"};
    tracks.push_back(b);

    write_corpus(tracks, dir.file("c.jsonl"));
    auto loaded = load_corpus(dir.file("c.jsonl"), small_vocab());
    REQUIRE(loaded.size() == 2);
    CHECK(loaded[0].id == a.id);
    CHECK(loaded[0].tags == a.tags);
    CHECK(loaded[0].captions == a.captions);
    CHECK(loaded[1].tags == b.tags);
}

TEST_CASE("vocabulary file invariants") {
    TempDir dir("vocab");

    SUBCASE("valid file loads sorted") {
        write_file(dir.file("v.json"),
                   R"({"genre": ["rock", "Pop"], "mood": ["mellow", "dark"]})");
        auto v = load_vocabulary(dir.file("v.json"));
        CHECK(v.descriptors(TagCategory::genre) == std::vector<std::string>{"pop", "rock"});
        CHECK(v.contains(TagCategory::mood, "dark"));
    }

    SUBCASE("descriptor in two categories rejected") {
        write_file(dir.file("v.json"), R"({"genre": ["rock", "pop"], "mood": ["rock", "sad"]})");
        CHECK_THROWS_WITH_AS(load_vocabulary(dir.file("v.json")),
                             doctest::Contains("more than one category"), ads::DataError);
    }

    SUBCASE("category with fewer than 2 descriptors rejected") {
        write_file(dir.file("v.json"), R"({"genre": ["rock"]})");
        CHECK_THROWS_AS(load_vocabulary(dir.file("v.json")), ads::DataError);
    }

    SUBCASE("save/load round-trip") {
        auto v = small_vocab();
        save_vocabulary(v, dir.file("v.json"));
        auto loaded = load_vocabulary(dir.file("v.json"));
        CHECK(loaded.categories == v.categories);
    }
}

TEST_CASE("split_corpus floor allocation and determinism") {
    SUBCASE("10 tracks at (0.8, 0.1, 0.1)") {
        auto split = split_corpus(make_tracks(10), {0.8, 0.1, 0.1}, 7);
        CHECK(split.train.size() == 8);
        CHECK(split.validation.size() == 1);
        CHECK(split.test.size() == 1);
    }

    SUBCASE("identical runs produce identical splits") {
        auto a = split_corpus(make_tracks(37), {0.6, 0.2, 0.2}, 99);
        auto b = split_corpus(make_tracks(37), {0.6, 0.2, 0.2}, 99);
        CHECK(a.train == b.train);
        CHECK(a.validation == b.validation);
        CHECK(a.test == b.test);
    }

    SUBCASE("100 tracks at (0.7, 0.15, 0.15) partitions all ids") {
        auto tracks = make_tracks(100);
        auto split = split_corpus(tracks, {0.7, 0.15, 0.15}, 3);
        CHECK(split.train.size() == 70);
        CHECK(split.validation.size() == 15);
        CHECK(split.test.size() == 15);
        std::set<std::string> all;
        all.insert(split.train.begin(), split.train.end());
        all.insert(split.validation.begin(), split.validation.end());
        all.insert(split.test.begin(), split.test.end());
        CHECK(all.size() == 100);
        for (const auto& t : tracks) CHECK(all.count(t.id) == 1);
    }

    SUBCASE("partition property over many (n, seed) pairs") {
        for (int n : {3, 5, 17, 64, 301}) {
            for (uint64_t seed : {0ull, 1ull, 42ull, 12345ull}) {
                auto tracks = make_tracks(n);
                auto split = split_corpus(tracks, {0.7, 0.15, 0.15}, seed);
                std::set<std::string> all;
                all.insert(split.train.begin(), split.train.end());
                all.insert(split.validation.begin(), split.validation.end());
                all.insert(split.test.begin(), split.test.end());
                REQUIRE(split.train.size() + split.validation.size() + split.test.size() ==
                        static_cast<size_t>(n));
                REQUIRE(all.size() == static_cast<size_t>(n));
            }
        }
    }

    SUBCASE("error cases") {
        CHECK_THROWS_AS(split_corpus(make_tracks(2), {0.8, 0.1, 0.1}, 0), ads::DataError);
        CHECK_THROWS_AS(split_corpus(make_tracks(10), {0.8, 0.1, 0.2}, 0), ads::ConfigError);
        CHECK_THROWS_AS(split_corpus(make_tracks(10), {1.0, -0.1, 0.1}, 0), ads::ConfigError);
    }
}

TEST_CASE("synthetic corpus embeddings are exact latent means at sigma 0") {
    TagVocabulary vocab = small_vocab();
    SyntheticWorld world;
    world.latent_dim = 16;
    world.sigma = 0.0;
    world.seed = 5;
    world.frames = 3;

    auto corpus = generate_synthetic_corpus(20, vocab, world, {1, 2});
    REQUIRE(corpus.tracks.size() == 20);
    REQUIRE(corpus.audio.size() == 20);

    for (const Track& t : corpus.tracks) {
        const auto& rec = corpus.audio.at(t.id);
        REQUIRE(rec.layers == 1);
        REQUIRE(rec.frames == 3);
        REQUIRE(rec.dim == 16);

        auto descriptors = t.all_descriptors();
        std::vector<double> mean(16, 0.0);
        for (const auto& d : descriptors) {
            auto lat = world.latent(d);
            for (int k = 0; k < 16; ++k) mean[k] += lat[k];
        }
        for (double& x : mean) x /= static_cast<double>(descriptors.size());
        for (int f = 0; f < 3; ++f) {
            for (int k = 0; k < 16; ++k) {
                CHECK(rec.values[static_cast<size_t>(f) * 16 + k] ==
                      static_cast<float>(mean[k]));  // exact, zero noise
            }
        }
    }
}

TEST_CASE("single-tag track at sigma 0 reproduces the latent exactly") {
    TagVocabulary vocab;
    vocab.categories[TagCategory::genre] = {"pop", "rock"};
    SyntheticWorld world;
    world.latent_dim = 8;
    world.seed = 11;
    world.frames = 1;

    auto corpus = generate_synthetic_corpus(6, vocab, world, {1, 1});
    for (const Track& t : corpus.tracks) {
        auto lat = world.latent(t.tags.at(TagCategory::genre)[0]);
        const auto& rec = corpus.audio.at(t.id);
        for (int k = 0; k < 8; ++k) CHECK(rec.values[k] == static_cast<float>(lat[k]));
    }
}

TEST_CASE("synthetic generation is byte-deterministic") {
    TempDir dir("synth_det");
    TagVocabulary vocab = builtin_vocabulary(8);
    SyntheticWorld world;
    world.latent_dim = 12;
    world.sigma = 0.1;
    world.seed = 123;

    auto first = generate_synthetic_corpus(50, vocab, world, {1, 3});
    auto second = generate_synthetic_corpus(50, vocab, world, {1, 3});
    write_corpus(first.tracks, dir.file("a.jsonl"));
    write_corpus(second.tracks, dir.file("b.jsonl"));
    ads::encoders::write_embeddings(first.audio, dir.file("a.mmeb"));
    ads::encoders::write_embeddings(second.audio, dir.file("b.mmeb"));
    CHECK(slurp(dir.file("a.jsonl")) == slurp(dir.file("b.jsonl")));
    CHECK(slurp(dir.file("a.mmeb")) == slurp(dir.file("b.mmeb")));
}

TEST_CASE("synthetic generation validates its inputs") {
    TagVocabulary vocab = small_vocab();
    SyntheticWorld world;
    CHECK_THROWS_AS(generate_synthetic_corpus(0, vocab, world, {1, 2}), ads::ConfigError);
    // mood only has 2 descriptors, so max=3 is impossible
    CHECK_THROWS_AS(generate_synthetic_corpus(5, vocab, world, {1, 3}), ads::DataError);
}

TEST_CASE("normalize_tag folds case and whitespace") {
    CHECK(normalize_tag("  Hip-Hop ") == "hip-hop");
    CHECK(normalize_tag("Bossa   Nova") == "bossa nova");
    CHECK(normalize_tag("ROCK") == "rock");
    CHECK(normalize_tag(" \t ") == "");
}
