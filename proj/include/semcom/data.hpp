#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include "semcom/image.hpp"

namespace semcom::data {

// Shared shape/color palette for the rendered datasets. A retrieval class is
// a (shape, color) pair; VQA objects use the first kVqaColors colors so its
// answer set stays small.
inline constexpr int kNumShapes = 4;  // circle, cross, triangle, ring
inline constexpr int kNumColors = 8;
inline constexpr int kVqaColors = 4;  // red, green, blue, yellow

const char* shape_name(int shape);
const char* color_name(int color);

// Anti-aliased draw of one primitive onto img; radius in pixels.
void draw_shape(Image& img, int shape, int color, double cx, double cy, double radius,
                double brightness = 1.0);

// ---- image retrieval ----

// Disjoint-class splits: the first half of the class list is the train split,
// the second half the test split.
struct RetrievalDataset {
    std::vector<Image> images;
    std::vector<int> labels;
    std::vector<int> train_indices;
    std::vector<int> test_indices;
    std::vector<int> train_classes;
    std::vector<int> test_classes;
    int num_classes = 0;
    int image_size = 0;
    uint64_t seed = 0;
};

// Classes are (shape, color) pairs arranged so both splits cover every shape
// and every color; per-sample jitter moves and rescales the primitive.
RetrievalDataset gen_retrieval(int num_classes, int per_class, int image_size, uint64_t seed);

// ---- machine translation ----

// Token-id layout shared by source and target streams: PAD, BOS, EOS at the
// head, then the source alphabet, then the target alphabet.
struct ParallelCorpus {
    static constexpr int kPad = 0;
    static constexpr int kBos = 1;
    static constexpr int kEos = 2;

    std::vector<std::vector<int>> source;
    std::vector<std::vector<int>> target;
    std::vector<int> train_indices;
    std::vector<int> test_indices;
    std::vector<int> rename;  // bijection source token -> target token
    int alphabet = 0;         // symbols per language
    int vocab_size = 0;       // 3 + 2 * alphabet
    int max_len = 0;
    uint64_t seed = 0;

    // The gold translation rule: rename every token, then swap adjacent
    // pairs (positions 0<->1, 2<->3, ...).
    std::vector<int> oracle_translate(const std::vector<int>& src) const;
};

ParallelCorpus gen_translation(int num_pairs, int max_len, uint64_t seed);

// ---- visual question answering ----

struct VqaObject {
    int cell_y = 0;
    int cell_x = 0;
    int shape = 0;
    int color = 0;
};

struct VqaScene {
    std::vector<VqaObject> objects;
    Image image;
};

enum class VqaTemplate { Exists, CountColor, CountShape, QueryColor };

struct VqaQuestion {
    int scene = 0;
    VqaTemplate tpl = VqaTemplate::Exists;
    int arg_shape = -1;
    int arg_color = -1;
    std::vector<int> tokens;  // question word ids
    int answer = 0;           // index into answer_names
};

struct VqaDataset {
    std::vector<VqaScene> scenes;
    std::vector<VqaQuestion> questions;
    std::vector<int> train_indices;  // question indices
    std::vector<int> test_indices;
    std::vector<std::string> question_vocab;
    std::vector<std::string> answer_names;  // closed answer set
    int grid = 0;
    int image_size = 0;
    int max_question_len = 0;
    uint64_t seed = 0;

    // Answers the structured question from the scene graph alone.
    int oracle_answer(const VqaQuestion& q) const;
};

VqaDataset gen_vqa(int num_scenes, int questions_per_scene, int grid, uint64_t seed,
                   int cell_px = 8);

// ---- persistence ----
// A dataset directory holds manifest.json plus raw row-major float64/int32
// tensors referenced by name from the manifest.

void save_retrieval(const RetrievalDataset& ds, const std::string& dir);
RetrievalDataset load_retrieval(const std::string& dir);
void save_translation(const ParallelCorpus& ds, const std::string& dir);
ParallelCorpus load_translation(const std::string& dir);
void save_vqa(const VqaDataset& ds, const std::string& dir);
VqaDataset load_vqa(const std::string& dir);

}  // namespace semcom::data
