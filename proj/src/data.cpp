#include "semcom/data.hpp"

#include <algorithm>
#include <cmath>
#include <stdexcept>

#include "semcom/mat.hpp"

namespace semcom::data {

namespace {

constexpr double kPalette[kNumColors][3] = {
    {0.90, 0.15, 0.15},  // red
    {0.15, 0.85, 0.20},  // green
    {0.20, 0.30, 0.95},  // blue
    {0.95, 0.85, 0.10},  // yellow
    {0.10, 0.85, 0.90},  // cyan
    {0.90, 0.20, 0.90},  // magenta
    {0.95, 0.55, 0.10},  // orange
    {0.60, 0.60, 0.65},  // gray
};
constexpr double kBackground[3] = {0.08, 0.08, 0.10};

const char* kShapeNames[kNumShapes] = {"circle", "cross", "triangle", "ring"};
const char* kColorNames[kNumColors] = {"red",  "green",   "blue",   "yellow",
                                       "cyan", "magenta", "orange", "gray"};

// Signed distance to the shape boundary; negative inside. The four shapes
// are chosen to differ in coarse mass layout (filled blob, thin plus,
// bottom-heavy wedge, hollow annulus), not just in outline.
double shape_sdf(int shape, double dx, double dy, double r) {
    switch (shape) {
        case 0:  // circle
            return std::hypot(dx, dy) - r;
        case 1: {  // cross of two thin bars
            const double bar = r * 0.32;
            const double horiz = std::max(std::abs(dx) - r, std::abs(dy) - bar);
            const double vert = std::max(std::abs(dx) - bar, std::abs(dy) - r);
            return std::min(horiz, vert);
        }
        case 2: {  // triangle: apex (0,-r), base corners (+-0.9r, 0.62r)
            const double base = dy - 0.62 * r;
            const double right = 0.874 * dx - 0.486 * dy - 0.486 * r;
            const double left = -0.874 * dx - 0.486 * dy - 0.486 * r;
            return std::max({base, right, left});
        }
        case 3: {  // ring
            return std::abs(std::hypot(dx, dy) - 0.78 * r) - 0.3 * r;
        }
        default:
            throw std::invalid_argument("shape_sdf: unknown shape");
    }
}

}  // namespace

const char* shape_name(int shape) {
    if (shape < 0 || shape >= kNumShapes) throw std::invalid_argument("bad shape id");
    return kShapeNames[shape];
}

const char* color_name(int color) {
    if (color < 0 || color >= kNumColors) throw std::invalid_argument("bad color id");
    return kColorNames[color];
}

void draw_shape_tinted(Image& img, int shape, const double rgb[3], double cx, double cy,
                       double radius) {
    const int y0 = std::max(0, static_cast<int>(cy - radius - 2));
    const int y1 = std::min(img.h - 1, static_cast<int>(cy + radius + 2));
    const int x0 = std::max(0, static_cast<int>(cx - radius - 2));
    const int x1 = std::min(img.w - 1, static_cast<int>(cx + radius + 2));
    for (int y = y0; y <= y1; ++y)
        for (int x = x0; x <= x1; ++x) {
            const double d = shape_sdf(shape, x + 0.5 - cx, y + 0.5 - cy, radius);
            const double cover = std::clamp(0.5 - d, 0.0, 1.0);  // ~1px AA edge
            if (cover <= 0.0) continue;
            for (int ch = 0; ch < img.c; ++ch)
                img.at(y, x, ch) = img.at(y, x, ch) * (1.0 - cover) + rgb[ch] * cover;
        }
}

void draw_shape(Image& img, int shape, int color, double cx, double cy, double radius,
                double brightness) {
    if (color < 0 || color >= kNumColors) throw std::invalid_argument("draw_shape: bad color");
    double rgb[3];
    for (int ch = 0; ch < 3; ++ch)
        rgb[ch] = std::clamp(kPalette[color][ch] * brightness, 0.0, 1.0);
    draw_shape_tinted(img, shape, rgb, cx, cy, radius);
}

RetrievalDataset gen_retrieval(int num_classes, int per_class, int image_size, uint64_t seed) {
    if (num_classes < 4) throw std::invalid_argument("gen_retrieval: need >= 4 classes");
    if (num_classes > 2 * kNumColors)
        throw std::invalid_argument("gen_retrieval: not enough shape/color pairs");
    if (num_classes % 2 != 0) throw std::invalid_argument("gen_retrieval: need an even count");
    if (image_size < 16) throw std::invalid_argument("gen_retrieval: image too small for shapes");

    RetrievalDataset ds;
    ds.num_classes = num_classes;
    ds.image_size = image_size;
    ds.seed = seed;

    // Each split assigns every class a distinct color; the held-out split
    // reuses the colors with shifted shapes, so no (shape, color) pair is
    // shared between splits.
    const int half = num_classes / 2;
    Rng rng(seed);
    for (int cls = 0; cls < num_classes; ++cls) {
        const bool test_half = cls >= half;
        const int within = test_half ? cls - half : cls;
        const int color = within % kNumColors;
        const int shape = (within + (test_half ? 1 : 0)) % kNumShapes;
        for (int s = 0; s < per_class; ++s) {
            Image img(image_size, image_size, 3);
            for (int y = 0; y < image_size; ++y)
                for (int x = 0; x < image_size; ++x)
                    for (int ch = 0; ch < 3; ++ch) img.at(y, x, ch) = kBackground[ch];
            const double jitter = image_size / 16.0;
            const double cx = image_size / 2.0 + rng.uniform(-jitter, jitter);
            const double cy = image_size / 2.0 + rng.uniform(-jitter, jitter);
            const double radius = image_size * 0.30 * rng.uniform(0.88, 1.12);
            // Strong photometric jitter keeps the color cue from carrying the
            // class on its own; shape has to do part of the work.
            const double brightness = rng.uniform(0.55, 1.0);
            double rgb[3];
            for (int ch = 0; ch < 3; ++ch)
                rgb[ch] = std::clamp(
                    kPalette[color][ch] * brightness * rng.uniform(0.85, 1.15), 0.0, 1.0);
            draw_shape_tinted(img, shape, rgb, cx, cy, radius);
            ds.images.push_back(std::move(img));
            ds.labels.push_back(cls);
        }
    }

    for (int cls = 0; cls < num_classes; ++cls)
        (cls < half ? ds.train_classes : ds.test_classes).push_back(cls);
    for (size_t i = 0; i < ds.labels.size(); ++i)
        (ds.labels[i] < half ? ds.train_indices : ds.test_indices).push_back(static_cast<int>(i));
    return ds;
}

std::vector<int> ParallelCorpus::oracle_translate(const std::vector<int>& src) const {
    std::vector<int> out;
    out.reserve(src.size());
    for (int id : src) {
        const int sym = id - 3;
        if (sym < 0 || sym >= alphabet)
            throw std::invalid_argument("oracle_translate: id outside source alphabet");
        out.push_back(3 + alphabet + rename[sym]);
    }
    for (size_t i = 0; i + 1 < out.size(); i += 2) std::swap(out[i], out[i + 1]);
    return out;
}

ParallelCorpus gen_translation(int num_pairs, int max_len, uint64_t seed) {
    if (max_len < 3) throw std::invalid_argument("gen_translation: max_len must be >= 3");
    if (num_pairs < 1) throw std::invalid_argument("gen_translation: need at least one pair");

    ParallelCorpus ds;
    ds.alphabet = 24;
    ds.vocab_size = 3 + 2 * ds.alphabet;
    ds.max_len = max_len;
    ds.seed = seed;

    Rng rng(seed);
    ds.rename.resize(ds.alphabet);
    for (int i = 0; i < ds.alphabet; ++i) ds.rename[i] = i;
    for (int i = ds.alphabet - 1; i > 0; --i)
        std::swap(ds.rename[i], ds.rename[rng.uniform_int(0, i)]);

    for (int p = 0; p < num_pairs; ++p) {
        const int len = rng.uniform_int(3, max_len);
        std::vector<int> src(len);
        for (int& t : src) t = 3 + rng.uniform_int(0, ds.alphabet - 1);
        ds.source.push_back(src);
        ds.target.push_back(ds.oracle_translate(src));
    }

    const int train = std::max(1, (num_pairs * 7) / 8);
    for (int i = 0; i < num_pairs; ++i)
        (i < train ? ds.train_indices : ds.test_indices).push_back(i);
    return ds;
}

int VqaDataset::oracle_answer(const VqaQuestion& q) const {
    const VqaScene& scene = scenes.at(q.scene);
    switch (q.tpl) {
        case VqaTemplate::Exists: {
            for (const auto& o : scene.objects)
                if (o.shape == q.arg_shape && o.color == q.arg_color) return 0;  // yes
            return 1;                                                            // no
        }
        case VqaTemplate::CountColor: {
            int n = 0;
            for (const auto& o : scene.objects)
                if (o.color == q.arg_color) ++n;
            return 2 + n;
        }
        case VqaTemplate::CountShape: {
            int n = 0;
            for (const auto& o : scene.objects)
                if (o.shape == q.arg_shape) ++n;
            return 2 + n;
        }
        case VqaTemplate::QueryColor: {
            int color = -1, n = 0;
            for (const auto& o : scene.objects)
                if (o.shape == q.arg_shape) {
                    color = o.color;
                    ++n;
                }
            if (n != 1) throw std::logic_error("QueryColor question over a non-unique shape");
            return 8 + color;
        }
    }
    throw std::logic_error("oracle_answer: unknown template");
}

VqaDataset gen_vqa(int num_scenes, int questions_per_scene, int grid, uint64_t seed,
                   int cell_px) {
    if (grid < 2) throw std::invalid_argument("gen_vqa: grid must be at least 2x2");
    if (num_scenes < 1 || questions_per_scene < 1)
        throw std::invalid_argument("gen_vqa: empty dataset requested");
    if (cell_px < 6) throw std::invalid_argument("gen_vqa: cells too small to draw shapes");

    VqaDataset ds;
    ds.grid = grid;
    ds.image_size = grid * cell_px;  // one cell per grid slot
    ds.seed = seed;
    ds.question_vocab = {"<pad>", "is",   "there", "a",      "how",    "many",
                         "what",  "color", "the",   "objects"};
    const int color_base = static_cast<int>(ds.question_vocab.size());
    for (int c = 0; c < kVqaColors; ++c) ds.question_vocab.push_back(color_name(c));
    const int shape_base = static_cast<int>(ds.question_vocab.size());
    for (int s = 0; s < kNumShapes; ++s) ds.question_vocab.push_back(shape_name(s));
    ds.answer_names = {"yes", "no", "0", "1", "2", "3", "4", "5"};
    for (int c = 0; c < kVqaColors; ++c) ds.answer_names.push_back(color_name(c));
    ds.max_question_len = 5;

    Rng rng(seed);
    const int max_objects = std::min(5, grid * grid);
    for (int s = 0; s < num_scenes; ++s) {
        VqaScene scene;
        scene.image = Image(ds.image_size, ds.image_size, 3);
        for (int y = 0; y < ds.image_size; ++y)
            for (int x = 0; x < ds.image_size; ++x)
                for (int ch = 0; ch < 3; ++ch) scene.image.at(y, x, ch) = kBackground[ch];

        std::vector<int> cells(grid * grid);
        for (int i = 0; i < grid * grid; ++i) cells[i] = i;
        for (int i = grid * grid - 1; i > 0; --i)
            std::swap(cells[i], cells[rng.uniform_int(0, i)]);

        const int n_obj = rng.uniform_int(2, max_objects);
        for (int o = 0; o < n_obj; ++o) {
            VqaObject obj;
            obj.cell_y = cells[o] / grid;
            obj.cell_x = cells[o] % grid;
            obj.shape = rng.uniform_int(0, kNumShapes - 1);
            obj.color = rng.uniform_int(0, kVqaColors - 1);
            const double half = cell_px / 2.0;
            const double cx = obj.cell_x * cell_px + half + rng.uniform(-0.5, 0.5);
            const double cy = obj.cell_y * cell_px + half + rng.uniform(-0.5, 0.5);
            const double radius = cell_px * 0.43 * rng.uniform(0.95, 1.08);
            draw_shape(scene.image, obj.shape, obj.color, cx, cy, radius,
                       rng.uniform(0.9, 1.0));
            scene.objects.push_back(obj);
        }
        ds.scenes.push_back(std::move(scene));
    }

    auto encode = [&](const VqaQuestion& q) {
        std::vector<int> toks;
        switch (q.tpl) {
            case VqaTemplate::Exists:
                toks = {1, 2, 3, color_base + q.arg_color, shape_base + q.arg_shape};
                break;
            case VqaTemplate::CountColor:
                toks = {4, 5, color_base + q.arg_color, 9};
                break;
            case VqaTemplate::CountShape:
                toks = {4, 5, shape_base + q.arg_shape, 9};
                break;
            case VqaTemplate::QueryColor:
                toks = {6, 7, 1, 8, shape_base + q.arg_shape};
                break;
        }
        return toks;
    };

    for (int s = 0; s < num_scenes; ++s) {
        const VqaScene& scene = ds.scenes[s];
        for (int k = 0; k < questions_per_scene; ++k) {
            VqaQuestion q;
            q.scene = s;
            const double dice = rng.uniform();
            if (dice < 0.40) {
                q.tpl = VqaTemplate::Exists;
                if (rng.uniform() < 0.5 && !scene.objects.empty()) {
                    const auto& o = scene.objects[rng.uniform_int(
                        0, static_cast<int>(scene.objects.size()) - 1)];
                    q.arg_shape = o.shape;
                    q.arg_color = o.color;
                } else {
                    q.arg_shape = rng.uniform_int(0, kNumShapes - 1);
                    q.arg_color = rng.uniform_int(0, kVqaColors - 1);
                }
            } else if (dice < 0.72) {
                q.tpl = VqaTemplate::CountColor;
                q.arg_color = rng.uniform_int(0, kVqaColors - 1);
            } else {
                // Attribute lookup needs a uniquely-shaped object; fall back
                // to existence when the scene has none.
                std::vector<int> unique_shapes;
                for (int sh = 0; sh < kNumShapes; ++sh) {
                    int n = 0;
                    for (const auto& o : scene.objects)
                        if (o.shape == sh) ++n;
                    if (n == 1) unique_shapes.push_back(sh);
                }
                if (unique_shapes.empty()) {
                    q.tpl = VqaTemplate::Exists;
                    q.arg_shape = rng.uniform_int(0, kNumShapes - 1);
                    q.arg_color = rng.uniform_int(0, kVqaColors - 1);
                } else {
                    q.tpl = VqaTemplate::QueryColor;
                    q.arg_shape = unique_shapes[rng.uniform_int(
                        0, static_cast<int>(unique_shapes.size()) - 1)];
                }
            }
            q.tokens = encode(q);
            q.answer = ds.oracle_answer(q);
            ds.questions.push_back(std::move(q));
        }
    }

    const int train_scenes = std::max(1, (num_scenes * 7) / 8);
    for (size_t i = 0; i < ds.questions.size(); ++i)
        (ds.questions[i].scene < train_scenes ? ds.train_indices : ds.test_indices)
            .push_back(static_cast<int>(i));
    return ds;
}

}  // namespace semcom::data
