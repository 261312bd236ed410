#include <json.hpp>

#include <filesystem>

#include "semcom/data.hpp"
#include "semcom/tensor_io.hpp"

// Dataset directory layout: manifest.json plus raw tensors referenced by
// file name. Everything needed to reproduce the dataset (seed, sizes,
// vocabularies, answer sets, splits) lives in the manifest.

namespace semcom::data {

using nlohmann::json;
namespace fs = std::filesystem;

namespace {

std::vector<double> flatten_images(const std::vector<Image>& images) {
    std::vector<double> out;
    if (images.empty()) return out;
    out.reserve(images.size() * images[0].px.size());
    for (const auto& img : images) out.insert(out.end(), img.px.begin(), img.px.end());
    return out;
}

std::vector<Image> unflatten_images(const std::vector<double>& flat, int n, int h, int w, int c) {
    std::vector<Image> out;
    out.reserve(n);
    const size_t stride = static_cast<size_t>(h) * w * c;
    for (int i = 0; i < n; ++i) {
        Image img(h, w, c);
        std::copy(flat.begin() + i * stride, flat.begin() + (i + 1) * stride, img.px.begin());
        out.push_back(std::move(img));
    }
    return out;
}

void flatten_ragged(const std::vector<std::vector<int>>& seqs, std::vector<int32_t>& flat,
                    std::vector<int32_t>& offsets) {
    offsets.clear();
    flat.clear();
    offsets.push_back(0);
    for (const auto& s : seqs) {
        for (int v : s) flat.push_back(v);
        offsets.push_back(static_cast<int32_t>(flat.size()));
    }
}

std::vector<std::vector<int>> unflatten_ragged(const std::vector<int32_t>& flat,
                                               const std::vector<int32_t>& offsets) {
    std::vector<std::vector<int>> out;
    for (size_t i = 0; i + 1 < offsets.size(); ++i)
        out.emplace_back(flat.begin() + offsets[i], flat.begin() + offsets[i + 1]);
    return out;
}

std::vector<int32_t> to_i32(const std::vector<int>& v) {
    return std::vector<int32_t>(v.begin(), v.end());
}

std::vector<int> to_int(const std::vector<int32_t>& v) {
    return std::vector<int>(v.begin(), v.end());
}

}  // namespace

void save_retrieval(const RetrievalDataset& ds, const std::string& dir) {
    fs::create_directories(dir);
    json m;
    m["kind"] = "retrieval";
    m["seed"] = ds.seed;
    m["num_classes"] = ds.num_classes;
    m["image_size"] = ds.image_size;
    m["count"] = ds.images.size();
    m["train_classes"] = ds.train_classes;
    m["test_classes"] = ds.test_classes;
    m["train_indices"] = ds.train_indices;
    m["test_indices"] = ds.test_indices;
    io::write_f64(dir + "/images.f64", flatten_images(ds.images));
    io::write_i32(dir + "/labels.i32", to_i32(ds.labels));
    io::write_text(dir + "/manifest.json", m.dump(2) + "\n");
}

RetrievalDataset load_retrieval(const std::string& dir) {
    const json m = json::parse(io::read_text(dir + "/manifest.json"));
    if (m.at("kind") != "retrieval") throw std::runtime_error("not a retrieval dataset: " + dir);
    RetrievalDataset ds;
    ds.seed = m.at("seed").get<uint64_t>();
    ds.num_classes = m.at("num_classes").get<int>();
    ds.image_size = m.at("image_size").get<int>();
    const int n = m.at("count").get<int>();
    ds.train_classes = m.at("train_classes").get<std::vector<int>>();
    ds.test_classes = m.at("test_classes").get<std::vector<int>>();
    const size_t px = static_cast<size_t>(ds.image_size) * ds.image_size * 3;
    ds.images = unflatten_images(io::read_f64(dir + "/images.f64", n * px), n, ds.image_size,
                                 ds.image_size, 3);
    ds.labels = to_int(io::read_i32(dir + "/labels.i32", n));
    ds.train_indices = m.at("train_indices").get<std::vector<int>>();
    ds.test_indices = m.at("test_indices").get<std::vector<int>>();
    return ds;
}

void save_translation(const ParallelCorpus& ds, const std::string& dir) {
    fs::create_directories(dir);
    json m;
    m["kind"] = "translation";
    m["seed"] = ds.seed;
    m["alphabet"] = ds.alphabet;
    m["vocab_size"] = ds.vocab_size;
    m["max_len"] = ds.max_len;
    m["count"] = ds.source.size();
    m["rename"] = ds.rename;
    m["train_indices"] = ds.train_indices;
    m["test_indices"] = ds.test_indices;
    std::vector<int32_t> flat, offsets;
    flatten_ragged(ds.source, flat, offsets);
    m["source_tokens"] = offsets.back();
    io::write_i32(dir + "/source.i32", flat);
    io::write_i32(dir + "/source_offsets.i32", offsets);
    flatten_ragged(ds.target, flat, offsets);
    m["target_tokens"] = offsets.back();
    io::write_i32(dir + "/target.i32", flat);
    io::write_i32(dir + "/target_offsets.i32", offsets);
    io::write_text(dir + "/manifest.json", m.dump(2) + "\n");
}

ParallelCorpus load_translation(const std::string& dir) {
    const json m = json::parse(io::read_text(dir + "/manifest.json"));
    if (m.at("kind") != "translation")
        throw std::runtime_error("not a translation dataset: " + dir);
    ParallelCorpus ds;
    ds.seed = m.at("seed").get<uint64_t>();
    ds.alphabet = m.at("alphabet").get<int>();
    ds.vocab_size = m.at("vocab_size").get<int>();
    ds.max_len = m.at("max_len").get<int>();
    ds.rename = m.at("rename").get<std::vector<int>>();
    ds.train_indices = m.at("train_indices").get<std::vector<int>>();
    ds.test_indices = m.at("test_indices").get<std::vector<int>>();
    const int n = m.at("count").get<int>();
    const auto src_flat = io::read_i32(dir + "/source.i32", m.at("source_tokens").get<size_t>());
    const auto src_off = io::read_i32(dir + "/source_offsets.i32", n + 1);
    ds.source = unflatten_ragged(src_flat, src_off);
    const auto tgt_flat = io::read_i32(dir + "/target.i32", m.at("target_tokens").get<size_t>());
    const auto tgt_off = io::read_i32(dir + "/target_offsets.i32", n + 1);
    ds.target = unflatten_ragged(tgt_flat, tgt_off);
    return ds;
}

void save_vqa(const VqaDataset& ds, const std::string& dir) {
    fs::create_directories(dir);
    json m;
    m["kind"] = "vqa";
    m["seed"] = ds.seed;
    m["grid"] = ds.grid;
    m["image_size"] = ds.image_size;
    m["max_question_len"] = ds.max_question_len;
    m["scene_count"] = ds.scenes.size();
    m["question_count"] = ds.questions.size();
    m["question_vocab"] = ds.question_vocab;
    m["answer_names"] = ds.answer_names;
    m["train_indices"] = ds.train_indices;
    m["test_indices"] = ds.test_indices;

    std::vector<Image> images;
    std::vector<int32_t> obj_flat, obj_offsets{0};
    for (const auto& s : ds.scenes) {
        images.push_back(s.image);
        for (const auto& o : s.objects) {
            obj_flat.push_back(o.cell_y);
            obj_flat.push_back(o.cell_x);
            obj_flat.push_back(o.shape);
            obj_flat.push_back(o.color);
        }
        obj_offsets.push_back(static_cast<int32_t>(obj_flat.size()));
    }
    io::write_f64(dir + "/images.f64", flatten_images(images));
    io::write_i32(dir + "/objects.i32", obj_flat);
    io::write_i32(dir + "/object_offsets.i32", obj_offsets);
    m["object_values"] = obj_flat.size();

    std::vector<int32_t> q_flat, q_offsets;
    std::vector<std::vector<int>> token_rows;
    std::vector<int32_t> q_meta;  // scene, template, arg_shape, arg_color, answer
    for (const auto& q : ds.questions) {
        token_rows.push_back(q.tokens);
        q_meta.push_back(q.scene);
        q_meta.push_back(static_cast<int32_t>(q.tpl));
        q_meta.push_back(q.arg_shape);
        q_meta.push_back(q.arg_color);
        q_meta.push_back(q.answer);
    }
    flatten_ragged(token_rows, q_flat, q_offsets);
    m["question_tokens"] = q_offsets.back();
    io::write_i32(dir + "/questions.i32", q_flat);
    io::write_i32(dir + "/question_offsets.i32", q_offsets);
    io::write_i32(dir + "/question_meta.i32", q_meta);
    io::write_text(dir + "/manifest.json", m.dump(2) + "\n");
}

VqaDataset load_vqa(const std::string& dir) {
    const json m = json::parse(io::read_text(dir + "/manifest.json"));
    if (m.at("kind") != "vqa") throw std::runtime_error("not a vqa dataset: " + dir);
    VqaDataset ds;
    ds.seed = m.at("seed").get<uint64_t>();
    ds.grid = m.at("grid").get<int>();
    ds.image_size = m.at("image_size").get<int>();
    ds.max_question_len = m.at("max_question_len").get<int>();
    ds.question_vocab = m.at("question_vocab").get<std::vector<std::string>>();
    ds.answer_names = m.at("answer_names").get<std::vector<std::string>>();
    ds.train_indices = m.at("train_indices").get<std::vector<int>>();
    ds.test_indices = m.at("test_indices").get<std::vector<int>>();

    const int n_scenes = m.at("scene_count").get<int>();
    const size_t px = static_cast<size_t>(ds.image_size) * ds.image_size * 3;
    auto images = unflatten_images(io::read_f64(dir + "/images.f64", n_scenes * px), n_scenes,
                                   ds.image_size, ds.image_size, 3);
    const auto obj_flat =
        io::read_i32(dir + "/objects.i32", m.at("object_values").get<size_t>());
    const auto obj_off = io::read_i32(dir + "/object_offsets.i32", n_scenes + 1);
    for (int s = 0; s < n_scenes; ++s) {
        VqaScene scene;
        scene.image = std::move(images[s]);
        for (int32_t i = obj_off[s]; i < obj_off[s + 1]; i += 4)
            scene.objects.push_back({obj_flat[i], obj_flat[i + 1], obj_flat[i + 2],
                                     obj_flat[i + 3]});
        ds.scenes.push_back(std::move(scene));
    }

    const int n_q = m.at("question_count").get<int>();
    const auto q_flat =
        io::read_i32(dir + "/questions.i32", m.at("question_tokens").get<size_t>());
    const auto q_off = io::read_i32(dir + "/question_offsets.i32", n_q + 1);
    const auto q_meta = io::read_i32(dir + "/question_meta.i32", static_cast<size_t>(n_q) * 5);
    for (int i = 0; i < n_q; ++i) {
        VqaQuestion q;
        q.tokens.assign(q_flat.begin() + q_off[i], q_flat.begin() + q_off[i + 1]);
        q.scene = q_meta[i * 5];
        q.tpl = static_cast<VqaTemplate>(q_meta[i * 5 + 1]);
        q.arg_shape = q_meta[i * 5 + 2];
        q.arg_color = q_meta[i * 5 + 3];
        q.answer = q_meta[i * 5 + 4];
        ds.questions.push_back(std::move(q));
    }
    return ds;
}

}  // namespace semcom::data
