#include "elp/model.hpp"

#include <algorithm>
#include <cmath>

#include "json.hpp"

namespace elp::nn {

namespace {

using nlohmann::json;

void xavier_fill(Tensor t, std::size_t fan_in, std::size_t fan_out,
                 Rng& rng) {
  const double bound =
      std::sqrt(6.0 / static_cast<double>(fan_in + fan_out));
  for (double& v : t.value()) v = rng.uniform(-bound, bound);
}

std::vector<bool> pad_mask(std::span<const int> tokens) {
  std::vector<bool> mask(tokens.size());
  for (std::size_t i = 0; i < tokens.size(); ++i) mask[i] = tokens[i] != 0;
  return mask;
}

}  // namespace

const char* head_kind_name(HeadKind head) {
  switch (head) {
    case HeadKind::kCnn: return "cnn";
    case HeadKind::kRnn: return "rnn";
    case HeadKind::kRnnAttention: return "rnn_attention";
  }
  return "?";
}

HeadKind head_kind_from_name(const std::string& name) {
  if (name == "cnn") return HeadKind::kCnn;
  if (name == "rnn") return HeadKind::kRnn;
  if (name == "rnn_attention") return HeadKind::kRnnAttention;
  throw Error("unknown model head '" + name +
              "' (expected cnn, rnn or rnn_attention)");
}

void ModelSpec::validate() const {
  if (n_classes < 2) throw Error("model: need at least 2 classes");
  if (n_ids < 3) throw Error("model: vocabulary too small");
  if (embed_dim < 1 || max_len < 1)
    throw Error("model: embed_dim and max_len must be positive");
  if (dense_hidden < 1) throw Error("model: dense_hidden must be positive");
  if (head == HeadKind::kCnn) {
    if (conv_kernel % 2 == 0) throw Error("model: conv kernel must be odd");
    if (pools.empty()) throw Error("model: CNN head needs pool specs");
    pooled_len();  // throws if the chain eats the sequence
  } else {
    if (lstm_hidden < 1 || lstm_layers < 1)
      throw Error("model: lstm dimensions must be positive");
    if (head == HeadKind::kRnnAttention && attention_dim < 1)
      throw Error("model: attention_dim must be positive");
  }
}

std::size_t ModelSpec::pooled_len() const {
  std::size_t t = max_len;
  for (std::size_t i = 0; i < pools.size(); ++i) {
    const auto& p = pools[i];
    if (p.size < 1 || p.stride < 1)
      throw Error("model: pool size/stride must be positive");
    if (t < p.size)
      throw Error("model: pool block " + std::to_string(i) +
                  " window " + std::to_string(p.size) +
                  " exceeds remaining length " + std::to_string(t));
    t = (t - p.size) / p.stride + 1;
  }
  return t;
}

Tensor Model::param(const std::string& name) const {
  for (const auto& [n, t] : params)
    if (n == name) return t;
  throw Error("model: no parameter named '" + name + "'");
}

void Model::zero_grads() {
  for (auto& [n, t] : params) t.zero_grad();
}

Model build_model(const ModelSpec& spec, std::uint64_t seed,
                  const Matrix* embedding_init) {
  spec.validate();
  Model m;
  m.spec = spec;
  Rng rng = make_rng(seed);

  auto add = [&](const std::string& name, std::vector<std::size_t> shape) {
    Tensor t = Tensor::zeros(std::move(shape));
    m.params.emplace_back(name, t);
    return t;
  };

  Tensor embed = add("embed", {spec.n_ids, spec.embed_dim});
  if (embedding_init != nullptr) {
    if (embedding_init->rows != spec.n_ids ||
        embedding_init->cols != spec.embed_dim)
      throw Error("model: embedding init shape mismatch");
    std::copy(embedding_init->data.begin(), embedding_init->data.end(),
              embed.value().begin());
    for (std::size_t c = 0; c < spec.embed_dim; ++c)
      embed.value()[c] = 0.0;  // PAD row
  } else {
    const double half = 0.5 / static_cast<double>(spec.embed_dim);
    for (std::size_t r = 1; r < spec.n_ids; ++r)
      for (std::size_t c = 0; c < spec.embed_dim; ++c)
        embed.value()[r * spec.embed_dim + c] = rng.uniform(-half, half);
  }

  std::size_t tail_in = 0;
  if (spec.head == HeadKind::kCnn) {
    std::size_t depth = spec.embed_dim;
    for (std::size_t blk = 0; blk < spec.pools.size(); ++blk) {
      Tensor w = add("conv" + std::to_string(blk) + ".w",
                     {spec.conv_filters, spec.conv_kernel, depth});
      xavier_fill(w, spec.conv_kernel * depth, spec.conv_filters, rng);
      add("conv" + std::to_string(blk) + ".b", {spec.conv_filters});
      depth = spec.conv_filters;
    }
    tail_in = spec.pooled_len() * spec.conv_filters;
  } else {
    std::size_t input_dim = spec.embed_dim;
    for (std::size_t layer = 0; layer < spec.lstm_layers; ++layer) {
      for (const char* dir : {"fwd", "bwd"}) {
        const std::string base =
            "lstm" + std::to_string(layer) + "." + dir + ".";
        Tensor w = add(base + "w", {4 * spec.lstm_hidden, input_dim});
        xavier_fill(w, input_dim, spec.lstm_hidden, rng);
        Tensor u = add(base + "u", {4 * spec.lstm_hidden, spec.lstm_hidden});
        xavier_fill(u, spec.lstm_hidden, spec.lstm_hidden, rng);
        Tensor b = add(base + "b", {4 * spec.lstm_hidden});
        for (std::size_t j = 0; j < spec.lstm_hidden; ++j)
          b.value()[spec.lstm_hidden + j] = 1.0;  // forget gate bias
      }
      input_dim = 2 * spec.lstm_hidden;
    }
    tail_in = 2 * spec.lstm_hidden;
    if (spec.head == HeadKind::kRnnAttention) {
      Tensor aw = add("attn.w", {spec.attention_dim, tail_in});
      xavier_fill(aw, tail_in, spec.attention_dim, rng);
      add("attn.b", {spec.attention_dim});
      Tensor av = add("attn.v", {spec.attention_dim});
      xavier_fill(av, spec.attention_dim, 1, rng);
    }
  }

  Tensor fc1 = add("fc1.w", {spec.dense_hidden, tail_in});
  xavier_fill(fc1, tail_in, spec.dense_hidden, rng);
  add("fc1.b", {spec.dense_hidden});
  Tensor fc2 = add("fc2.w", {spec.n_classes, spec.dense_hidden});
  xavier_fill(fc2, spec.dense_hidden, spec.n_classes, rng);
  add("fc2.b", {spec.n_classes});
  return m;
}

Tensor Model::forward(std::span<const int> tokens, bool train, Rng& rng,
                      double dropout_keep) const {
  if (tokens.size() != spec.max_len)
    throw Error("model: expected " + std::to_string(spec.max_len) +
                " tokens, got " + std::to_string(tokens.size()));

  Tensor x = embedding_rows(param("embed"), tokens, spec.freeze_embedding);
  Tensor pooled;

  if (spec.head == HeadKind::kCnn) {
    for (std::size_t blk = 0; blk < spec.pools.size(); ++blk) {
      x = conv1d_same(x, param("conv" + std::to_string(blk) + ".w"),
                      param("conv" + std::to_string(blk) + ".b"));
      x = relu(x);
      x = maxpool1d(x, spec.pools[blk].size, spec.pools[blk].stride);
    }
    pooled = dropout(flatten(x), dropout_keep, rng, train);
  } else {
    x = dropout(x, dropout_keep, rng, train);
    for (std::size_t layer = 0; layer < spec.lstm_layers; ++layer) {
      const std::string base = "lstm" + std::to_string(layer) + ".";
      Tensor fwd = lstm_layer(x, param(base + "fwd.w"), param(base + "fwd.u"),
                              param(base + "fwd.b"), false);
      Tensor bwd = lstm_layer(x, param(base + "bwd.w"), param(base + "bwd.u"),
                              param(base + "bwd.b"), true);
      x = concat_cols(fwd, bwd);
    }
    const auto mask = pad_mask(tokens);
    if (spec.head == HeadKind::kRnnAttention)
      pooled = attention_pool(x, param("attn.w"), param("attn.b"),
                              param("attn.v"), mask)
                   .context;
    else
      pooled = masked_mean(x, mask);
  }

  Tensor hidden = relu(dense(pooled, param("fc1.w"), param("fc1.b")));
  return dense(hidden, param("fc2.w"), param("fc2.b"));
}

std::vector<double> Model::predict(std::span<const int> tokens) const {
  Rng rng = make_rng(0);
  Tensor logits = forward(tokens, false, rng, 1.0);
  return softmax_values(logits.value());
}

void save_model(const std::string& base_path, const Model& model) {
  json manifest;
  const ModelSpec& s = model.spec;
  manifest["kind"] = "model_checkpoint";
  manifest["head"] = head_kind_name(s.head);
  manifest["n_classes"] = s.n_classes;
  manifest["n_ids"] = s.n_ids;
  manifest["embed_dim"] = s.embed_dim;
  manifest["max_len"] = s.max_len;
  manifest["conv_filters"] = s.conv_filters;
  manifest["conv_kernel"] = s.conv_kernel;
  json pools = json::array();
  for (const auto& p : s.pools)
    pools.push_back({{"size", p.size}, {"stride", p.stride}});
  manifest["pools"] = pools;
  manifest["lstm_hidden"] = s.lstm_hidden;
  manifest["lstm_layers"] = s.lstm_layers;
  manifest["attention_dim"] = s.attention_dim;
  manifest["dense_hidden"] = s.dense_hidden;
  manifest["freeze_embedding"] = s.freeze_embedding;
  manifest["vocab_hash"] = hex64(s.vocab_hash);

  std::vector<std::uint8_t> blob;
  json tensors = json::array();
  std::size_t offset = 0;
  for (const auto& [name, t] : model.params) {
    json entry;
    entry["name"] = name;
    entry["shape"] = t.shape();
    entry["offset"] = offset;
    tensors.push_back(entry);
    const auto* bytes = reinterpret_cast<const std::uint8_t*>(t.value().data());
    blob.insert(blob.end(), bytes, bytes + t.size() * sizeof(double));
    offset += t.size() * sizeof(double);
  }
  manifest["tensors"] = tensors;
  manifest["blob_bytes"] = blob.size();
  manifest["blob_hash"] = hex64(fnv1a(blob.data(), blob.size()));

  write_file_text(base_path + ".json", manifest.dump(2) + "\n");
  write_file_bytes(base_path + ".bin", blob);
}

Model load_model(const std::string& base_path) {
  json manifest;
  try {
    manifest = json::parse(read_file_text(base_path + ".json"));
  } catch (const json::parse_error& e) {
    throw ParseError("model manifest " + base_path + ".json: " + e.what());
  }
  if (manifest.value("kind", "") != "model_checkpoint")
    throw ParseError("not a model checkpoint: " + base_path);

  ModelSpec s;
  s.head = head_kind_from_name(manifest.at("head").get<std::string>());
  s.n_classes = manifest.at("n_classes").get<std::size_t>();
  s.n_ids = manifest.at("n_ids").get<std::size_t>();
  s.embed_dim = manifest.at("embed_dim").get<std::size_t>();
  s.max_len = manifest.at("max_len").get<std::size_t>();
  s.conv_filters = manifest.at("conv_filters").get<std::size_t>();
  s.conv_kernel = manifest.at("conv_kernel").get<std::size_t>();
  s.pools.clear();
  for (const auto& p : manifest.at("pools"))
    s.pools.push_back(
        {p.at("size").get<std::size_t>(), p.at("stride").get<std::size_t>()});
  s.lstm_hidden = manifest.at("lstm_hidden").get<std::size_t>();
  s.lstm_layers = manifest.at("lstm_layers").get<std::size_t>();
  s.attention_dim = manifest.at("attention_dim").get<std::size_t>();
  s.dense_hidden = manifest.at("dense_hidden").get<std::size_t>();
  s.freeze_embedding = manifest.at("freeze_embedding").get<bool>();
  s.vocab_hash =
      std::stoull(manifest.at("vocab_hash").get<std::string>(), nullptr, 16);

  Model m = build_model(s, 0);
  auto blob = read_file_bytes(base_path + ".bin");
  if (manifest.at("blob_bytes").get<std::size_t>() != blob.size())
    throw ParseError("model blob size mismatch for " + base_path);
  if (manifest.at("blob_hash").get<std::string>() !=
      hex64(fnv1a(blob.data(), blob.size())))
    throw ParseError("model blob hash mismatch for " + base_path);

  const auto& tensors = manifest.at("tensors");
  if (tensors.size() != m.params.size())
    throw ParseError("model tensor count mismatch for " + base_path);
  for (std::size_t i = 0; i < m.params.size(); ++i) {
    const auto& entry = tensors[i];
    auto& [name, t] = m.params[i];
    if (entry.at("name").get<std::string>() != name)
      throw ParseError("model tensor order mismatch at '" + name + "'");
    const std::size_t offset = entry.at("offset").get<std::size_t>();
    const std::size_t bytes = t.size() * sizeof(double);
    if (offset + bytes > blob.size())
      throw ParseError("model blob truncated at tensor '" + name + "'");
    std::copy_n(blob.data() + offset, bytes,
                reinterpret_cast<std::uint8_t*>(t.value().data()));
  }
  return m;
}

}  // namespace elp::nn
