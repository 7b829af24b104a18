#include "feddist/config.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <fstream>
#include <sstream>

namespace feddist {

namespace {

std::string trim(const std::string& s) {
  const auto begin = s.find_first_not_of(" \t\r");
  if (begin == std::string::npos) return "";
  const auto end = s.find_last_not_of(" \t\r");
  return s.substr(begin, end - begin + 1);
}

std::string fmt(double v) {
  char buf[40];
  std::snprintf(buf, sizeof(buf), "%.17g", v);
  return buf;
}

double parse_double(const std::string& key, const std::string& value) {
  try {
    std::size_t pos = 0;
    const double v = std::stod(value, &pos);
    if (pos != value.size()) throw std::invalid_argument("trailing characters");
    return v;
  } catch (const std::exception&) {
    throw ConfigError("key '" + key + "': bad number '" + value + "'");
  }
}

std::uint64_t parse_u64(const std::string& key, const std::string& value) {
  try {
    std::size_t pos = 0;
    const unsigned long long v = std::stoull(value, &pos);
    if (pos != value.size()) throw std::invalid_argument("trailing characters");
    return v;
  } catch (const std::exception&) {
    throw ConfigError("key '" + key + "': bad integer '" + value + "'");
  }
}

bool parse_bool(const std::string& key, const std::string& value) {
  if (value == "on" || value == "true" || value == "1") return true;
  if (value == "off" || value == "false" || value == "0") return false;
  throw ConfigError("key '" + key + "': expected on/off, got '" + value + "'");
}

std::vector<std::string> split_list(const std::string& value) {
  std::vector<std::string> parts;
  std::stringstream ss(value);
  std::string item;
  while (std::getline(ss, item, ',')) {
    item = trim(item);
    if (!item.empty()) parts.push_back(item);
  }
  return parts;
}

LossKind parse_loss(const std::string& key, const std::string& value) {
  if (value == "cel") return LossKind::kCel;
  if (value == "mse") return LossKind::kMse;
  throw ConfigError("key '" + key + "': expected cel|mse, got '" + value + "'");
}

const char* loss_name(LossKind kind) {
  return kind == LossKind::kCel ? "cel" : "mse";
}

const char* activation_name(Activation act) {
  return act == Activation::kTanh ? "tanh" : "relu";
}

void apply_key(ExperimentConfig& cfg, const std::string& key,
               const std::string& value) {
  if (key == "branch") {
    if (value == "fd") cfg.branch = Branch::kFd;
    else if (value == "fedavg") cfg.branch = Branch::kFedavg;
    else throw ConfigError("key 'branch': expected fd|fedavg, got '" + value + "'");
  } else if (key == "clients") {
    cfg.clients = static_cast<std::size_t>(parse_u64(key, value));
  } else if (key == "alpha") {
    cfg.alpha = parse_double(key, value);
  } else if (key == "rounds") {
    cfg.rounds = static_cast<std::size_t>(parse_u64(key, value));
  } else if (key == "seed") {
    cfg.seed = parse_u64(key, value);
  } else if (key == "seeds") {
    cfg.seeds.clear();
    for (const auto& item : split_list(value)) {
      cfg.seeds.push_back(parse_u64(key, item));
    }
  } else if (key == "broadcast") {
    cfg.broadcast = parse_bool(key, value);
  } else if (key == "attack.kind") {
    try {
      cfg.attack.kind = parse_attack_kind(value);
    } catch (const std::exception& e) {
      throw ConfigError("key 'attack.kind': " + std::string(e.what()));
    }
  } else if (key == "attack.loss") {
    cfg.attack.loss = parse_loss(key, value);
  } else if (key == "attack.similarity") {
    if (value == "pretrained") cfg.attack.similarity = SimilaritySource::kPretrained;
    else if (value == "file") cfg.attack.similarity = SimilaritySource::kFile;
    else throw ConfigError("key 'attack.similarity': expected pretrained|file");
  } else if (key == "attack.similarity_file") {
    cfg.attack.similarity_file = value;
  } else if (key == "attack.noise_scale") {
    cfg.attack.noise_scale = parse_double(key, value);
  } else if (key == "attack.seed") {
    cfg.attack.seed = parse_u64(key, value);
  } else if (key == "defence.kind") {
    try {
      cfg.defence.kind = parse_defence_kind(value);
    } catch (const std::exception& e) {
      throw ConfigError("key 'defence.kind': " + std::string(e.what()));
    }
  } else if (key == "defence.expguard") {
    cfg.defence.expguard = parse_bool(key, value);
  } else if (key == "arch.hidden") {
    cfg.hidden.clear();
    for (const auto& item : split_list(value)) {
      cfg.hidden.push_back(static_cast<std::size_t>(parse_u64(key, item)));
    }
  } else if (key == "arch.activation") {
    if (value == "tanh") cfg.activation = Activation::kTanh;
    else if (value == "relu") cfg.activation = Activation::kRelu;
    else throw ConfigError("key 'arch.activation': expected tanh|relu");
  } else if (key == "server.loss") {
    cfg.server_loss = parse_loss(key, value);
  } else if (key == "client.epochs") {
    cfg.client_schedule.epochs = static_cast<std::size_t>(parse_u64(key, value));
  } else if (key == "client.batch") {
    cfg.client_schedule.batch_size = static_cast<std::size_t>(parse_u64(key, value));
  } else if (key == "client.lr") {
    cfg.client_schedule.learning_rate = parse_double(key, value);
  } else if (key == "client.momentum") {
    cfg.client_schedule.momentum = parse_double(key, value);
  } else if (key == "client.weight_decay") {
    cfg.client_schedule.weight_decay = parse_double(key, value);
  } else if (key == "server.epochs") {
    cfg.server_schedule.epochs = static_cast<std::size_t>(parse_u64(key, value));
  } else if (key == "server.batch") {
    cfg.server_schedule.batch_size = static_cast<std::size_t>(parse_u64(key, value));
  } else if (key == "server.lr") {
    cfg.server_schedule.learning_rate = parse_double(key, value);
  } else if (key == "server.momentum") {
    cfg.server_schedule.momentum = parse_double(key, value);
  } else if (key == "server.weight_decay") {
    cfg.server_schedule.weight_decay = parse_double(key, value);
  } else if (key == "data.kind") {
    if (value == "blobs") cfg.data.kind = DataSpec::Kind::kBlobs;
    else if (value == "file") cfg.data.kind = DataSpec::Kind::kFile;
    else throw ConfigError("key 'data.kind': expected blobs|file");
  } else if (key == "data.classes") {
    cfg.data.classes = static_cast<std::size_t>(parse_u64(key, value));
  } else if (key == "data.dim") {
    cfg.data.dim = static_cast<std::size_t>(parse_u64(key, value));
  } else if (key == "data.per_class") {
    cfg.data.per_class = static_cast<std::size_t>(parse_u64(key, value));
  } else if (key == "data.spread") {
    cfg.data.spread = parse_double(key, value);
  } else if (key == "data.path") {
    cfg.data.path = value;
  } else if (key == "split.private") {
    cfg.split_plan.private_frac = parse_double(key, value);
  } else if (key == "split.public") {
    cfg.split_plan.public_frac = parse_double(key, value);
  } else if (key == "split.validation") {
    cfg.split_plan.validation_frac = parse_double(key, value);
  } else if (key == "split.test") {
    cfg.split_plan.test_frac = parse_double(key, value);
  } else {
    throw ConfigError("unknown key '" + key + "'");
  }
}

}  // namespace

const char* branch_name(Branch b) { return b == Branch::kFd ? "fd" : "fedavg"; }

std::size_t ExperimentConfig::byzantine_count() const {
  return static_cast<std::size_t>(
      std::llround(alpha * static_cast<double>(clients)));
}

void ExperimentConfig::check() const {
  try {
    if (clients < 1) throw ConfigError("clients must be >= 1");
    if (rounds < 1) throw ConfigError("rounds must be >= 1");
    if (!(alpha >= 0.0) || alpha >= 0.5) {
      throw ConfigError("alpha must lie in [0, 0.5)");
    }
    const double exact = alpha * static_cast<double>(clients);
    if (std::abs(exact - std::llround(exact)) > 1e-9) {
      throw ConfigError("alpha * clients must be a whole number of clients");
    }
    attack.check();
    defence.check();

    const bool fd_attack = attack.kind != AttackKind::kFedavgGauss &&
                           attack.kind != AttackKind::kFedavgTakeover;
    if (branch == Branch::kFd && !fd_attack) {
      throw ConfigError("parameter-space attacks need branch=fedavg");
    }
    if (branch == Branch::kFedavg && !fd_attack && byzantine_count() == 0) {
      throw ConfigError("fedavg attack configured with zero byzantine clients");
    }
    if (branch == Branch::kFedavg && fd_attack && attack.kind != AttackKind::kNone) {
      throw ConfigError("prediction-space attacks need branch=fd");
    }

    Architecture probe{std::max<std::size_t>(data.dim, 1), hidden,
                       std::max<std::size_t>(data.classes, 2), activation};
    probe.check();
    client_schedule.check();
    server_schedule.check();

    if (data.kind == DataSpec::Kind::kBlobs) {
      if (data.classes < 2 || data.dim < 2 || data.per_class < 1) {
        throw ConfigError("blobs need classes >= 2, dim >= 2, per_class >= 1");
      }
      if (!(data.spread >= 0.0)) throw ConfigError("data.spread must be >= 0");
    } else if (data.path.empty()) {
      throw ConfigError("data.kind=file needs data.path");
    }
    SplitPlan plan = split_plan;
    plan.clients = clients;
    plan.check();
  } catch (const ConfigError&) {
    throw;
  } catch (const std::exception& e) {
    throw ConfigError(e.what());
  }
}

std::string ExperimentConfig::canonical_string() const {
  std::ostringstream out;
  out << "branch=" << branch_name(branch) << '\n';
  out << "clients=" << clients << '\n';
  out << "alpha=" << fmt(alpha) << '\n';
  out << "rounds=" << rounds << '\n';
  out << "seed=" << seed << '\n';
  out << "seeds=";
  for (std::size_t i = 0; i < seeds.size(); ++i) {
    out << (i ? "," : "") << seeds[i];
  }
  out << '\n';
  out << "broadcast=" << (broadcast ? "on" : "off") << '\n';
  out << "attack.kind=" << attack_kind_name(attack.kind) << '\n';
  out << "attack.loss=" << loss_name(attack.loss) << '\n';
  out << "attack.similarity="
      << (attack.similarity == SimilaritySource::kPretrained ? "pretrained" : "file")
      << '\n';
  out << "attack.similarity_file=" << attack.similarity_file << '\n';
  out << "attack.noise_scale=" << fmt(attack.noise_scale) << '\n';
  out << "attack.seed=" << attack.seed << '\n';
  out << "defence.kind=" << defence_kind_name(defence.kind) << '\n';
  out << "defence.expguard=" << (defence.expguard ? "on" : "off") << '\n';
  out << "arch.hidden=";
  for (std::size_t i = 0; i < hidden.size(); ++i) out << (i ? "," : "") << hidden[i];
  out << '\n';
  out << "arch.activation=" << activation_name(activation) << '\n';
  out << "server.loss=" << loss_name(server_loss) << '\n';
  const auto emit_schedule = [&](const char* prefix, const TrainSchedule& s) {
    out << prefix << ".epochs=" << s.epochs << '\n';
    out << prefix << ".batch=" << s.batch_size << '\n';
    out << prefix << ".lr=" << fmt(s.learning_rate) << '\n';
    out << prefix << ".momentum=" << fmt(s.momentum) << '\n';
    out << prefix << ".weight_decay=" << fmt(s.weight_decay) << '\n';
  };
  emit_schedule("client", client_schedule);
  emit_schedule("server", server_schedule);
  out << "data.kind="
      << (data.kind == DataSpec::Kind::kBlobs ? "blobs" : "file") << '\n';
  out << "data.classes=" << data.classes << '\n';
  out << "data.dim=" << data.dim << '\n';
  out << "data.per_class=" << data.per_class << '\n';
  out << "data.spread=" << fmt(data.spread) << '\n';
  out << "data.path=" << data.path << '\n';
  out << "split.private=" << fmt(split_plan.private_frac) << '\n';
  out << "split.public=" << fmt(split_plan.public_frac) << '\n';
  out << "split.validation=" << fmt(split_plan.validation_frac) << '\n';
  out << "split.test=" << fmt(split_plan.test_frac) << '\n';
  return out.str();
}

std::uint64_t ExperimentConfig::config_hash() const {
  // FNV-1a over the canonical serialization
  const std::string s = canonical_string();
  std::uint64_t h = 1469598103934665603ULL;
  for (unsigned char ch : s) {
    h ^= ch;
    h *= 1099511628211ULL;
  }
  return h;
}

ExperimentConfig parse_config_text(const std::string& text) {
  ExperimentConfig cfg;
  std::istringstream in(text);
  std::string line;
  std::size_t lineno = 0;
  while (std::getline(in, line)) {
    ++lineno;
    const auto comment = line.find('#');
    if (comment != std::string::npos) line = line.substr(0, comment);
    line = trim(line);
    if (line.empty()) continue;
    const auto eq = line.find('=');
    if (eq == std::string::npos) {
      throw ConfigError("line " + std::to_string(lineno) +
                        ": expected key=value, got '" + line + "'");
    }
    const std::string key = trim(line.substr(0, eq));
    const std::string value = trim(line.substr(eq + 1));
    if (key.empty()) {
      throw ConfigError("line " + std::to_string(lineno) + ": empty key");
    }
    apply_key(cfg, key, value);
  }
  if (cfg.seeds.empty()) cfg.seeds = {cfg.seed};
  return cfg;
}

ExperimentConfig load_config_file(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw ConfigError("cannot open config file " + path);
  std::ostringstream buffer;
  buffer << in.rdbuf();
  return parse_config_text(buffer.str());
}

}  // namespace feddist
