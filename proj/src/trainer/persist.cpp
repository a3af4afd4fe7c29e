// Checkpoint and metrics serialization.
#include <bit>
#include <cstring>
#include <fstream>
#include <sstream>

#include <nlohmann/json.hpp>

#include "common/error.hpp"
#include "trainer/trainer.hpp"

namespace gada::train {

using json = nlohmann::ordered_json;

namespace {

constexpr std::string_view kMagic = "GADA-CKPT v1";

json spec_json(const nets::NetSpec& s) {
  return json{{"widths", s.widths}, {"alpha", s.alpha}, {"head", nets::head_name(s.head)}};
}

nets::NetSpec spec_from(const json& j) {
  nets::NetSpec s;
  s.widths = j.at("widths").get<std::vector<std::size_t>>();
  s.alpha = j.at("alpha").get<double>();
  s.head = nets::parse_head(j.at("head").get<std::string>());
  return s;
}

json adam_json(const nets::AdamState& a) {
  return json{{"step", a.step},
              {"lr", a.config.lr},
              {"beta1", a.config.beta1},
              {"beta2", a.config.beta2},
              {"eps", a.config.eps}};
}

void adam_from(const json& j, nets::AdamState& a) {
  a.step = j.at("step").get<std::uint64_t>();
  a.config.lr = j.at("lr").get<double>();
  a.config.beta1 = j.at("beta1").get<double>();
  a.config.beta2 = j.at("beta2").get<double>();
  a.config.eps = j.at("eps").get<double>();
}

json kv_json(const KeyValues& kv) {
  json arr = json::array();
  for (const auto& [k, v] : kv) arr.push_back(json::array({k, v}));
  return arr;
}

KeyValues kv_from(const json& j) {
  KeyValues kv;
  for (const auto& p : j) kv.emplace_back(p.at(0).get<std::string>(), p.at(1).get<std::string>());
  return kv;
}

json eval_json(const Evaluation& e) {
  return json{{"step", e.step}, {"phase", e.phase}, {"accuracy", e.accuracy}, {"confusion", e.confusion}};
}

Evaluation eval_from(const json& j) {
  Evaluation e;
  e.step = j.at("step").get<std::uint64_t>();
  e.phase = j.at("phase").get<std::string>();
  e.accuracy = j.at("accuracy").get<double>();
  e.confusion = j.at("confusion").get<std::vector<std::vector<std::uint64_t>>>();
  return e;
}

struct NamedTensor {
  std::string name;
  const ad::Tensor* tensor;
};

void collect(const std::string& prefix, const ad::ParamStore& store, std::vector<NamedTensor>& out) {
  for (const auto& e : store) out.push_back({prefix + e.name, &e.value});
}

std::vector<NamedTensor> tensor_list(const TrainState& s) {
  std::vector<NamedTensor> out;
  collect("", s.nets.classifier.params, out);
  collect("", s.nets.discriminator.params, out);
  collect("", s.nets.generator.params, out);
  collect("opt/classifier/m/", s.nets.classifier_opt.first_moment, out);
  collect("opt/classifier/v/", s.nets.classifier_opt.second_moment, out);
  collect("opt/discriminator/m/", s.nets.discriminator_opt.first_moment, out);
  collect("opt/discriminator/v/", s.nets.discriminator_opt.second_moment, out);
  collect("opt/generator/m/", s.nets.generator_opt.first_moment, out);
  collect("opt/generator/v/", s.nets.generator_opt.second_moment, out);
  if (s.teacher) collect("teacher/", *s.teacher, out);
  return out;
}

void put_f64_le(std::string& out, double v) {
  std::uint64_t bits = std::bit_cast<std::uint64_t>(v);
  for (int i = 0; i < 8; ++i) out.push_back(static_cast<char>((bits >> (8 * i)) & 0xff));
}

class Reader {
 public:
  explicit Reader(std::string_view bytes) : bytes_(bytes) {}

  std::string_view line(const char* what) {
    const std::size_t nl = bytes_.find('\n', pos_);
    if (nl == std::string_view::npos) fail(std::string("truncated ") + what);
    const std::string_view out = bytes_.substr(pos_, nl - pos_);
    pos_ = nl + 1;
    return out;
  }

  double f64() {
    if (bytes_.size() - pos_ < 8) fail("truncated tensor payload");
    std::uint64_t bits = 0;
    for (int i = 0; i < 8; ++i) {
      bits |= static_cast<std::uint64_t>(static_cast<unsigned char>(bytes_[pos_ + i])) << (8 * i);
    }
    pos_ += 8;
    return std::bit_cast<double>(bits);
  }

  std::size_t offset() const noexcept { return pos_; }
  bool done() const noexcept { return pos_ == bytes_.size(); }

  [[noreturn]] void fail(const std::string& what) const {
    throw FormatError("checkpoint: " + what + " at byte offset " + std::to_string(pos_));
  }

 private:
  std::string_view bytes_;
  std::size_t pos_ = 0;
};

void restore(ad::ParamStore& store, const std::string& prefix, std::map<std::string, ad::Tensor>& tensors,
             Reader& r) {
  for (auto& e : store) {
    auto it = tensors.find(prefix + e.name);
    if (it == tensors.end()) r.fail("missing tensor '" + prefix + e.name + "'");
    if (it->second.shape() != e.value.shape()) r.fail("shape mismatch for '" + prefix + e.name + "'");
    e.value = std::move(it->second);
    tensors.erase(it);
  }
}

}  // namespace

std::string serialize_checkpoint(const TrainState& s) {
  const NetBundle& nb = s.nets;
  const auto tensors = tensor_list(s);
  json traces = json::object();
  for (const auto& [name, values] : s.traces) traces[name] = values;
  json evals = json::array();
  for (const auto& e : s.evaluations) evals.push_back(eval_json(e));

  const json meta = {
      {"format", kMagic},
      {"config", kv_json(s.config_echo)},
      {"hyper", kv_json(to_key_values(s.hp))},
      {"num_classes", s.num_classes},
      {"input_dim", s.input_dim},
      {"specs",
       {{"g", spec_json(nb.classifier.g_spec)},
        {"h", spec_json(nb.classifier.h_spec)},
        {"D", spec_json(nb.discriminator.spec)},
        {"G", spec_json(nb.generator.spec)}}},
      {"disc_tap", nets::disc_tap_name(nb.discriminator.tap)},
      {"phi_tap", nets::phi_tap_name(nb.classifier.phi_tap)},
      {"step", s.step},
      {"dirt_step", s.dirt_step},
      {"adam",
       {{"classifier", adam_json(nb.classifier_opt)},
        {"discriminator", adam_json(nb.discriminator_opt)},
        {"generator", adam_json(nb.generator_opt)}}},
      {"teacher", s.teacher.has_value()},
      {"traces", traces},
      {"evaluations", evals},
      {"tensors", tensors.size()},
  };

  std::string out;
  out.append(kMagic).push_back('\n');
  out.append(meta.dump()).push_back('\n');
  for (const auto& t : tensors) {
    out.append(t.name).push_back('\n');
    const auto& shape = t.tensor->shape();
    for (std::size_t i = 0; i < shape.size(); ++i) {
      if (i) out.push_back(' ');
      out.append(std::to_string(shape[i]));
    }
    out.push_back('\n');
    for (double v : t.tensor->values()) put_f64_le(out, v);
  }
  return out;
}

TrainState parse_checkpoint(std::string_view bytes) {
  Reader r(bytes);
  if (r.line("header") != kMagic) {
    throw FormatError("checkpoint: bad magic, expected '" + std::string(kMagic) + "' at byte offset 0");
  }
  const std::size_t meta_offset = r.offset();
  json meta;
  try {
    meta = json::parse(r.line("metadata block"));
  } catch (const json::exception& e) {
    throw FormatError("checkpoint: malformed metadata at byte offset " + std::to_string(meta_offset) +
                      ": " + e.what());
  }

  TrainState s;
  try {
    s.config_echo = kv_from(meta.at("config"));
    for (const auto& [k, v] : kv_from(meta.at("hyper"))) apply_key_value(s.hp, k, v);
    s.num_classes = meta.at("num_classes").get<std::size_t>();
    s.input_dim = meta.at("input_dim").get<std::size_t>();
    const json& specs = meta.at("specs");
    NetBundle& nb = s.nets;
    nb.classifier.g_spec = spec_from(specs.at("g"));
    nb.classifier.h_spec = spec_from(specs.at("h"));
    nb.classifier.num_classes = s.num_classes;
    nb.classifier.phi_tap = nets::parse_phi_tap(meta.at("phi_tap").get<std::string>());
    nb.discriminator.spec = spec_from(specs.at("D"));
    nb.discriminator.tap = nets::parse_disc_tap(meta.at("disc_tap").get<std::string>());
    nb.generator.spec = spec_from(specs.at("G"));
    nb.classifier.validate();
    nb.discriminator.validate();
    nb.generator.validate();
    s.step = meta.at("step").get<std::uint64_t>();
    s.dirt_step = meta.at("dirt_step").get<std::uint64_t>();
    for (const auto& [name, values] : meta.at("traces").items()) {
      s.traces[name] = values.get<std::vector<double>>();
    }
    for (const auto& e : meta.at("evaluations")) s.evaluations.push_back(eval_from(e));

    // Shapes come from the specs; values from the payload below.
    auto shaped = [](const nets::NetSpec& spec, const char* prefix) {
      ad::ParamStore p;
      for (std::size_t l = 0; l < spec.layers(); ++l) {
        p.add(std::string(prefix) + "/W" + std::to_string(l),
              ad::Tensor::zeros({spec.widths[l], spec.widths[l + 1]}));
        p.add(std::string(prefix) + "/b" + std::to_string(l), ad::Tensor::zeros({spec.widths[l + 1]}));
      }
      return p;
    };
    nb.classifier.params = shaped(nb.classifier.g_spec, "g");
    nb.classifier.params.append(shaped(nb.classifier.h_spec, "h"));
    nb.discriminator.params = shaped(nb.discriminator.spec, "D");
    nb.generator.params = shaped(nb.generator.spec, "G");
    nb.classifier_opt = nets::AdamState::create(nb.classifier.params, {});
    nb.discriminator_opt = nets::AdamState::create(nb.discriminator.params, {});
    nb.generator_opt = nets::AdamState::create(nb.generator.params, {});
    adam_from(meta.at("adam").at("classifier"), nb.classifier_opt);
    adam_from(meta.at("adam").at("discriminator"), nb.discriminator_opt);
    adam_from(meta.at("adam").at("generator"), nb.generator_opt);
    if (meta.at("teacher").get<bool>()) s.teacher = nb.classifier.params;
  } catch (const json::exception& e) {
    throw FormatError("checkpoint: incomplete metadata at byte offset " + std::to_string(meta_offset) +
                      ": " + e.what());
  } catch (const Error& e) {
    throw FormatError("checkpoint: invalid metadata at byte offset " + std::to_string(meta_offset) +
                      ": " + e.what());
  }

  const std::size_t count = meta.at("tensors").get<std::size_t>();
  std::map<std::string, ad::Tensor> tensors;
  for (std::size_t t = 0; t < count; ++t) {
    std::string name(r.line("tensor name"));
    const std::string_view shape_line = r.line("tensor shape");
    ad::Shape shape;
    std::istringstream ss{std::string(shape_line)};
    std::size_t e = 0;
    while (ss >> e) shape.push_back(e);
    if (shape.empty() || !ss.eof()) r.fail("malformed shape line for '" + name + "'");
    const std::size_t n = ad::shape_size(shape);
    std::vector<double> values(n);
    for (double& v : values) v = r.f64();
    try {
      tensors.emplace(name, ad::Tensor(std::move(shape), std::move(values)));
    } catch (const Error& ex) {
      r.fail("invalid tensor '" + name + "': " + ex.what());
    }
  }
  if (!r.done()) r.fail("trailing bytes after last tensor");

  NetBundle& nb = s.nets;
  restore(nb.classifier.params, "", tensors, r);
  restore(nb.discriminator.params, "", tensors, r);
  restore(nb.generator.params, "", tensors, r);
  restore(nb.classifier_opt.first_moment, "opt/classifier/m/", tensors, r);
  restore(nb.classifier_opt.second_moment, "opt/classifier/v/", tensors, r);
  restore(nb.discriminator_opt.first_moment, "opt/discriminator/m/", tensors, r);
  restore(nb.discriminator_opt.second_moment, "opt/discriminator/v/", tensors, r);
  restore(nb.generator_opt.first_moment, "opt/generator/m/", tensors, r);
  restore(nb.generator_opt.second_moment, "opt/generator/v/", tensors, r);
  if (s.teacher) restore(*s.teacher, "teacher/", tensors, r);
  if (!tensors.empty()) r.fail("unexpected tensor '" + tensors.begin()->first + "'");
  return s;
}

void save_checkpoint(const TrainState& state, const std::filesystem::path& path) {
  const std::string bytes = serialize_checkpoint(state);
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) throw IoError("cannot write checkpoint '" + path.string() + "'");
  out.write(bytes.data(), static_cast<std::streamsize>(bytes.size()));
  if (!out) throw IoError("write failed for checkpoint '" + path.string() + "'");
}

TrainState load_checkpoint(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw IoError("cannot open checkpoint '" + path.string() + "'");
  std::ostringstream ss;
  ss << in.rdbuf();
  return parse_checkpoint(ss.str());
}

std::string metrics_json(const TrainState& s) {
  json config = json::object();
  for (const auto& [k, v] : s.config_echo) config[k] = v;

  auto losses_at = [&](const Evaluation& e) {
    json out = json::object();
    const bool refine = e.phase == "refine";
    if (!refine && e.step == 0) return out;
    const std::uint64_t idx = refine ? e.step - s.step - 1 : e.step - 1;
    for (const auto& [name, values] : s.traces) {
      const bool is_refine = name.rfind("dirt.", 0) == 0;
      if (is_refine != refine) continue;
      if (idx < values.size()) out[name] = values[idx];
    }
    return out;
  };

  json history = json::array();
  for (const auto& e : s.evaluations) {
    history.push_back(
        {{"step", e.step}, {"phase", e.phase}, {"target_accuracy", e.accuracy}, {"losses", losses_at(e)}});
  }
  json doc = {
      {"format", "gada-metrics v1"},
      {"config", config},
      {"num_classes", s.num_classes},
      {"steps_completed", s.step},
      {"refine_steps_completed", s.dirt_step},
      {"history", history},
  };
  if (!s.evaluations.empty()) {
    const Evaluation& f = s.evaluations.back();
    doc["final"] = {{"step", f.step},
                    {"phase", f.phase},
                    {"target_accuracy", f.accuracy},
                    {"confusion", f.confusion}};
  }
  return doc.dump(2) + "\n";
}

}  // namespace gada::train
