#include "xsei/model_io.hpp"

#include "json.hpp"
#include "xsei/common.hpp"

namespace xsei::models {

namespace {

using nlohmann::json;

json descriptor_json(const Descriptor& d) {
  return {{"name", d.name}, {"hyperparameters", d.hyperparameters}, {"seed", d.seed}};
}

Descriptor descriptor_from(const json& j) {
  Descriptor d;
  d.name = j.at("name").get<std::string>();
  d.hyperparameters = j.at("hyperparameters").get<std::map<std::string, std::string>>();
  d.seed = j.at("seed").get<std::uint64_t>();
  return d;
}

void append(std::vector<double>& out, const std::vector<double>& v) {
  out.insert(out.end(), v.begin(), v.end());
}

struct Reader {
  const std::vector<double>& p;
  std::size_t pos = 0;

  double next() {
    if (pos >= p.size()) throw Error("checkpoint parameter block is too short");
    return p[pos++];
  }
  std::vector<double> take(std::size_t n) {
    if (pos + n > p.size()) throw Error("checkpoint parameter block is too short");
    std::vector<double> v(p.begin() + static_cast<std::ptrdiff_t>(pos),
                          p.begin() + static_cast<std::ptrdiff_t>(pos + n));
    pos += n;
    return v;
  }
  void finish() const {
    if (pos != p.size()) throw Error("checkpoint parameter block has trailing values");
  }
};

int to_index(double v, std::size_t limit) {
  if (!(v >= -1.0) || v != std::floor(v) || v >= static_cast<double>(limit)) {
    throw Error("checkpoint holds an invalid index");
  }
  return static_cast<int>(v);
}

}  // namespace

nn::Checkpoint to_checkpoint(const Model& model) {
  json h;
  h["format"] = "model";
  h["family"] = to_string(model.family());
  h["kind"] = model.kind();
  h["descriptor"] = descriptor_json(model.descriptor());
  h["num_classes"] = model.num_classes();
  h["feature_names"] = model.feature_names();
  std::vector<double> p;

  if (const auto* m = dynamic_cast<const KnnModel*>(&model)) {
    h["k"] = m->k();
    h["points"] = m->points().size();
    append(p, m->standardizer().mean);
    append(p, m->standardizer().scale);
    for (std::size_t i = 0; i < m->points().size(); ++i) {
      append(p, m->points()[i]);
      p.push_back(static_cast<double>(m->labels()[i]));
    }
  } else if (const auto* m = dynamic_cast<const TreeModel*>(&model)) {
    std::vector<std::size_t> sizes;
    for (const auto& t : m->trees()) {
      sizes.push_back(t.nodes.size());
      for (const auto& n : t.nodes) {
        p.push_back(static_cast<double>(n.feature));
        p.push_back(n.threshold);
        p.push_back(static_cast<double>(n.left));
        p.push_back(static_cast<double>(n.right));
        append(p, n.probabilities);
      }
    }
    h["tree_sizes"] = sizes;
  } else if (const auto* m = dynamic_cast<const LinearModel*>(&model)) {
    h["converged"] = m->converged();
    h["iterations"] = m->iterations();
    append(p, m->standardizer().mean);
    append(p, m->standardizer().scale);
    append(p, m->weights());
    append(p, m->bias());
  } else if (const auto* m = dynamic_cast<const LbnnModel*>(&model)) {
    const auto net = nn::network_checkpoint(m->network());
    h["network"] = json::parse(net.header_json).at("network");
    h["input_scale"] = m->input_scale();
    h["pooling"] = to_string(m->variant());
    p = net.params;
  } else {
    throw Error("cannot serialize model '" + model.descriptor().name + "'");
  }
  return {h.dump(), std::move(p)};
}

TrainedModel from_checkpoint(const nn::Checkpoint& ckpt) {
  try {
    const json h = json::parse(ckpt.header_json);
    if (h.value("format", "") != "model") throw Error("checkpoint does not hold a model");
    const auto kind = h.at("kind").get<std::string>();
    const auto family = h.at("family").get<std::string>();
    auto desc = descriptor_from(h.at("descriptor"));
    const auto k = h.at("num_classes").get<std::size_t>();
    auto names = h.at("feature_names").get<std::vector<std::string>>();
    const std::size_t d = names.size();
    Reader r{ckpt.params};

    if (kind == "knn" || kind == "cart" || kind == "ensemble" || kind == "linear") {
      if (family != "feature_pool") throw Error("family tag does not match model kind");
    } else if (kind == "lbnn") {
      if (family != "raw_signal") throw Error("family tag does not match model kind");
    }

    if (kind == "knn") {
      Standardizer st{r.take(d), r.take(d)};
      const auto count = h.at("points").get<std::size_t>();
      std::vector<std::vector<double>> points;
      std::vector<int> labels;
      for (std::size_t i = 0; i < count; ++i) {
        points.push_back(r.take(d));
        labels.push_back(to_index(r.next(), k));
      }
      r.finish();
      return std::make_shared<KnnModel>(std::move(desc), k, std::move(names), h.at("k").get<std::size_t>(),
                                        std::move(st), std::move(points), std::move(labels));
    }
    if (kind == "cart" || kind == "ensemble") {
      std::vector<Tree> trees;
      for (std::size_t size : h.at("tree_sizes").get<std::vector<std::size_t>>()) {
        Tree t;
        for (std::size_t i = 0; i < size; ++i) {
          Tree::Node n;
          n.feature = to_index(r.next(), d);
          n.threshold = r.next();
          n.left = to_index(r.next(), size);
          n.right = to_index(r.next(), size);
          n.probabilities = r.take(k);
          if (n.feature >= 0 && (n.left <= static_cast<int>(i) || n.right <= static_cast<int>(i))) {
            throw Error("tree node links must point forward");
          }
          t.nodes.push_back(std::move(n));
        }
        trees.push_back(std::move(t));
      }
      r.finish();
      return std::make_shared<TreeModel>(std::move(desc), k, std::move(names), std::move(trees), kind);
    }
    if (kind == "linear") {
      Standardizer st{r.take(d), r.take(d)};
      auto w = r.take(k * d);
      auto b = r.take(k);
      r.finish();
      return std::make_shared<LinearModel>(std::move(desc), k, std::move(names), std::move(st),
                                           std::move(w), std::move(b), h.at("converged").get<bool>(),
                                           h.at("iterations").get<std::size_t>());
    }
    if (kind == "lbnn") {
      json nh;
      nh["network"] = h.at("network");
      auto net = nn::network_from_checkpoint({nh.dump(), ckpt.params});
      const auto pooling = h.at("pooling").get<std::string>();
      return std::make_shared<LbnnModel>(std::move(desc), std::move(net),
                                         h.at("input_scale").get<double>(),
                                         pooling == "max" ? PoolVariant::max : PoolVariant::avg);
    }
    throw Error("unknown model kind '" + kind + "' in checkpoint");
  } catch (const json::exception& e) {
    throw Error(std::string("malformed model checkpoint header: ") + e.what());
  }
}

void save_model(const std::filesystem::path& path, const Model& model) {
  nn::write_checkpoint(path, to_checkpoint(model));
}

TrainedModel load_model(const std::filesystem::path& path) {
  return from_checkpoint(nn::read_checkpoint(path));
}

}  // namespace xsei::models
