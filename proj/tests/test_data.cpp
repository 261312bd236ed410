#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <algorithm>
#include <filesystem>
#include <set>

#include "semcom/data.hpp"

using namespace semcom;
using namespace semcom::data;

TEST_CASE("retrieval dataset shape, labels and disjoint splits") {
    auto ds = gen_retrieval(8, 32, 32, 5);
    CHECK(ds.images.size() == 256);
    CHECK(ds.labels.size() == 256);
    CHECK(*std::min_element(ds.labels.begin(), ds.labels.end()) == 0);
    CHECK(*std::max_element(ds.labels.begin(), ds.labels.end()) == 7);

    std::set<int> train(ds.train_classes.begin(), ds.train_classes.end());
    std::set<int> test(ds.test_classes.begin(), ds.test_classes.end());
    for (int c : test) CHECK(train.count(c) == 0);
    CHECK(train.size() + test.size() == 8);

    for (int i : ds.train_indices) CHECK(train.count(ds.labels[i]) == 1);
    for (int i : ds.test_indices) CHECK(test.count(ds.labels[i]) == 1);

    // Pixel determinism per seed.
    auto ds2 = gen_retrieval(8, 32, 32, 5);
    CHECK(ds.images[17].px == ds2.images[17].px);
    auto ds3 = gen_retrieval(8, 32, 32, 6);
    CHECK(ds.images[17].px != ds3.images[17].px);

    CHECK_THROWS_AS(gen_retrieval(2, 8, 32, 1), std::invalid_argument);
    CHECK_THROWS_AS(gen_retrieval(8, 8, 8, 1), std::invalid_argument);
}

TEST_CASE("retrieval splits share no shape/color pair and colors are unique per split") {
    auto ds = gen_retrieval(16, 4, 32, 9);
    const int half = 8;
    auto tuple_of = [&](int cls) {
        const bool test_half = cls >= half;
        const int within = test_half ? cls - half : cls;
        return std::pair<int, int>{(within + (test_half ? 1 : 0)) % kNumShapes,
                                   within % kNumColors};
    };
    std::set<std::pair<int, int>> train_pairs, test_pairs;
    std::set<int> train_colors, test_colors, train_shapes, test_shapes;
    for (int c : ds.train_classes) {
        train_pairs.insert(tuple_of(c));
        train_shapes.insert(tuple_of(c).first);
        train_colors.insert(tuple_of(c).second);
    }
    for (int c : ds.test_classes) {
        test_pairs.insert(tuple_of(c));
        test_shapes.insert(tuple_of(c).first);
        test_colors.insert(tuple_of(c).second);
    }
    for (const auto& p : test_pairs) CHECK(train_pairs.count(p) == 0);
    // Colors identify classes within each split.
    CHECK(train_colors.size() == ds.train_classes.size());
    CHECK(test_colors.size() == ds.test_classes.size());
    CHECK(train_shapes.size() == kNumShapes);
    CHECK(test_shapes.size() == kNumShapes);
}

TEST_CASE("translation corpus obeys the oracle rule everywhere") {
    auto ds = gen_translation(200, 10, 3);
    CHECK(ds.source.size() == 200);
    for (size_t i = 0; i < ds.source.size(); ++i)
        CHECK(ds.oracle_translate(ds.source[i]) == ds.target[i]);

    CHECK(ds.vocab_size <= 64);
    for (const auto& s : ds.source) {
        CHECK(static_cast<int>(s.size()) <= 10);
        CHECK(static_cast<int>(s.size()) >= 3);
        for (int t : s) {
            CHECK(t >= 3);
            CHECK(t < 3 + ds.alphabet);
        }
    }
    for (const auto& t : ds.target)
        for (int id : t) {
            CHECK(id >= 3 + ds.alphabet);
            CHECK(id < ds.vocab_size);
        }

    auto ds2 = gen_translation(200, 10, 3);
    CHECK(ds.source == ds2.source);
    CHECK(ds.target == ds2.target);
    auto ds3 = gen_translation(200, 10, 4);
    CHECK(ds.source != ds3.source);
}

TEST_CASE("rename map is a bijection") {
    auto ds = gen_translation(5, 6, 77);
    std::set<int> seen(ds.rename.begin(), ds.rename.end());
    CHECK(static_cast<int>(seen.size()) == ds.alphabet);
}

TEST_CASE("vqa labels all match the scene-graph oracle") {
    auto ds = gen_vqa(50, 4, 4, 21);
    CHECK(ds.scenes.size() == 50);
    CHECK(ds.questions.size() == 200);
    for (const auto& q : ds.questions) CHECK(q.answer == ds.oracle_answer(q));

    for (const auto& s : ds.scenes) {
        CHECK(s.objects.size() >= 2);
        CHECK(s.objects.size() <= 5);
        std::set<std::pair<int, int>> cells;
        for (const auto& o : s.objects) {
            CHECK(cells.insert({o.cell_y, o.cell_x}).second);  // distinct cells
            CHECK(o.cell_y < 4);
            CHECK(o.cell_x < 4);
        }
    }

    CHECK(ds.answer_names.size() == 12);  // yes/no, 0..5, four colors
    for (const auto& q : ds.questions) {
        CHECK(q.answer >= 0);
        CHECK(q.answer < static_cast<int>(ds.answer_names.size()));
        CHECK(static_cast<int>(q.tokens.size()) <= ds.max_question_len);
        for (int t : q.tokens) CHECK(t < static_cast<int>(ds.question_vocab.size()));
    }

    auto ds2 = gen_vqa(50, 4, 4, 21);
    CHECK(ds2.scenes[13].image.px == ds.scenes[13].image.px);
    CHECK(ds2.questions[77].tokens == ds.questions[77].tokens);

    CHECK_THROWS_AS(gen_vqa(10, 2, 1, 1), std::invalid_argument);
}

TEST_CASE("vqa train/test split is by scene") {
    auto ds = gen_vqa(40, 3, 4, 8);
    std::set<int> train_scenes, test_scenes;
    for (int qi : ds.train_indices) train_scenes.insert(ds.questions[qi].scene);
    for (int qi : ds.test_indices) test_scenes.insert(ds.questions[qi].scene);
    for (int s : test_scenes) CHECK(train_scenes.count(s) == 0);
}

TEST_CASE("dataset persistence round trips") {
    namespace fs = std::filesystem;
    const std::string dir = fs::temp_directory_path() / "semcom_data_test";
    fs::remove_all(dir);

    auto r = gen_retrieval(8, 4, 32, 3);
    save_retrieval(r, dir + "/retrieval");
    auto r2 = load_retrieval(dir + "/retrieval");
    CHECK(r2.images.size() == r.images.size());
    CHECK(r2.images[5].px == r.images[5].px);
    CHECK(r2.labels == r.labels);
    CHECK(r2.train_indices == r.train_indices);
    CHECK(r2.test_classes == r.test_classes);

    auto t = gen_translation(30, 8, 4);
    save_translation(t, dir + "/translation");
    auto t2 = load_translation(dir + "/translation");
    CHECK(t2.source == t.source);
    CHECK(t2.target == t.target);
    CHECK(t2.rename == t.rename);
    CHECK(t2.oracle_translate(t.source[7]) == t.target[7]);

    auto v = gen_vqa(10, 3, 4, 5);
    save_vqa(v, dir + "/vqa");
    auto v2 = load_vqa(dir + "/vqa");
    CHECK(v2.scenes.size() == v.scenes.size());
    CHECK(v2.scenes[3].image.px == v.scenes[3].image.px);
    CHECK(v2.scenes[3].objects.size() == v.scenes[3].objects.size());
    CHECK(v2.questions[11].tokens == v.questions[11].tokens);
    CHECK(v2.questions[11].answer == v.questions[11].answer);
    CHECK(v2.answer_names == v.answer_names);
    for (const auto& q : v2.questions) CHECK(q.answer == v2.oracle_answer(q));

    fs::remove_all(dir);
}
