#include "hrt/config.hpp"

#include <charconv>
#include <filesystem>

#include "hrt/binio.hpp"
#include "hrt/error.hpp"

namespace hrt {

namespace {

[[noreturn]] void bad(const std::string& what) { throw Error(Errc::config_error, what); }

std::string trim(const std::string& s) {
  std::size_t a = s.find_first_not_of(" \t\r");
  if (a == std::string::npos) return "";
  std::size_t b = s.find_last_not_of(" \t\r");
  return s.substr(a, b - a + 1);
}

// Strips a trailing comment that is not inside a quoted string.
std::string strip_comment(const std::string& line) {
  bool in_string = false;
  for (std::size_t i = 0; i < line.size(); ++i) {
    if (line[i] == '"') in_string = !in_string;
    if (line[i] == '#' && !in_string) return line.substr(0, i);
  }
  return line;
}

TomlValue parse_scalar(const std::string& text, int line_no) {
  const std::string t = trim(text);
  if (t.empty()) bad("line " + std::to_string(line_no) + ": empty value");
  if (t.front() == '"') {
    if (t.size() < 2 || t.back() != '"') bad("line " + std::to_string(line_no) + ": unterminated string");
    return {t.substr(1, t.size() - 2)};
  }
  if (t == "true") return {true};
  if (t == "false") return {false};
  // integer first, then float
  std::int64_t i = 0;
  auto [ip, iec] = std::from_chars(t.data(), t.data() + t.size(), i);
  if (iec == std::errc() && ip == t.data() + t.size()) return {i};
  double d = 0;
  auto [dp, dec] = std::from_chars(t.data(), t.data() + t.size(), d);
  if (dec == std::errc() && dp == t.data() + t.size()) return {d};
  bad("line " + std::to_string(line_no) + ": cannot parse value '" + t + "'");
}

TomlValue parse_value(const std::string& text, int line_no) {
  const std::string t = trim(text);
  if (!t.empty() && t.front() == '[') {
    if (t.back() != ']') bad("line " + std::to_string(line_no) + ": unterminated array");
    std::vector<TomlValue> items;
    std::string inner = t.substr(1, t.size() - 2);
    std::string field;
    bool in_string = false;
    for (char ch : inner) {
      if (ch == '"') in_string = !in_string;
      if (ch == ',' && !in_string) {
        if (!trim(field).empty()) items.push_back(parse_scalar(field, line_no));
        field.clear();
      } else {
        field += ch;
      }
    }
    if (!trim(field).empty()) items.push_back(parse_scalar(field, line_no));
    return {items};
  }
  return parse_scalar(t, line_no);
}

double number_or(const TomlDoc& doc, const std::string& section, const std::string& key, double fallback) {
  return doc.has(section, key) ? doc.get(section, key).as_double(section + "." + key) : fallback;
}

std::int64_t int_or(const TomlDoc& doc, const std::string& section, const std::string& key,
                    std::int64_t fallback) {
  return doc.has(section, key) ? doc.get(section, key).as_int(section + "." + key) : fallback;
}

std::string string_or(const TomlDoc& doc, const std::string& section, const std::string& key,
                      const std::string& fallback) {
  return doc.has(section, key) ? doc.get(section, key).as_string(section + "." + key) : fallback;
}

std::vector<int> int_list_or(const TomlDoc& doc, const std::string& section, const std::string& key,
                             std::vector<int> fallback) {
  if (!doc.has(section, key)) return fallback;
  std::vector<int> out;
  for (const TomlValue& v : doc.get(section, key).as_array(section + "." + key))
    out.push_back(static_cast<int>(v.as_int(section + "." + key)));
  return out;
}

std::vector<double> double_list_or(const TomlDoc& doc, const std::string& section, const std::string& key,
                                   std::vector<double> fallback) {
  if (!doc.has(section, key)) return fallback;
  const TomlValue& v = doc.get(section, key);
  if (std::holds_alternative<std::vector<TomlValue>>(v.v)) {
    std::vector<double> out;
    for (const TomlValue& item : v.as_array(section + "." + key))
      out.push_back(item.as_double(section + "." + key));
    return out;
  }
  return {v.as_double(section + "." + key)};
}

void append_number(std::string& out, double v) {
  char buf[32];
  auto [p, ec] = std::to_chars(buf, buf + sizeof(buf), v);
  out.append(buf, p);
}

}  // namespace

bool TomlValue::as_bool(const std::string& key) const {
  if (auto* b = std::get_if<bool>(&v)) return *b;
  bad(key + ": expected a boolean");
}

std::int64_t TomlValue::as_int(const std::string& key) const {
  if (auto* i = std::get_if<std::int64_t>(&v)) return *i;
  if (auto* d = std::get_if<double>(&v)) {
    if (*d == static_cast<double>(static_cast<std::int64_t>(*d))) return static_cast<std::int64_t>(*d);
  }
  bad(key + ": expected an integer");
}

double TomlValue::as_double(const std::string& key) const {
  if (auto* d = std::get_if<double>(&v)) return *d;
  if (auto* i = std::get_if<std::int64_t>(&v)) return static_cast<double>(*i);
  bad(key + ": expected a number");
}

const std::string& TomlValue::as_string(const std::string& key) const {
  if (auto* s = std::get_if<std::string>(&v)) return *s;
  bad(key + ": expected a string");
}

const std::vector<TomlValue>& TomlValue::as_array(const std::string& key) const {
  if (auto* a = std::get_if<std::vector<TomlValue>>(&v)) return *a;
  bad(key + ": expected an array");
}

bool TomlDoc::has(const std::string& section, const std::string& key) const {
  if (section.empty()) return root.count(key) > 0;
  auto it = sections.find(section);
  return it != sections.end() && it->second.count(key) > 0;
}

const TomlValue& TomlDoc::get(const std::string& section, const std::string& key) const {
  if (section.empty()) {
    auto it = root.find(key);
    if (it == root.end()) bad("missing key '" + key + "'");
    return it->second;
  }
  auto sit = sections.find(section);
  if (sit == sections.end()) bad("missing section [" + section + "]");
  auto it = sit->second.find(key);
  if (it == sit->second.end()) bad("missing key '" + section + "." + key + "'");
  return it->second;
}

TomlDoc parse_toml(const std::string& text) {
  TomlDoc doc;
  TomlTable* current = &doc.root;
  std::string line;
  int line_no = 0;
  std::size_t pos = 0;
  while (pos <= text.size()) {
    const std::size_t nl = text.find('\n', pos);
    line = text.substr(pos, nl == std::string::npos ? std::string::npos : nl - pos);
    pos = nl == std::string::npos ? text.size() + 1 : nl + 1;
    ++line_no;

    line = trim(strip_comment(line));
    if (line.empty()) continue;
    if (line.front() == '[') {
      if (line.back() != ']') bad("line " + std::to_string(line_no) + ": unterminated section header");
      const std::string name = trim(line.substr(1, line.size() - 2));
      if (name.empty()) bad("line " + std::to_string(line_no) + ": empty section name");
      current = &doc.sections[name];
      continue;
    }
    const std::size_t eq = line.find('=');
    if (eq == std::string::npos) bad("line " + std::to_string(line_no) + ": expected key = value");
    const std::string key = trim(line.substr(0, eq));
    if (key.empty()) bad("line " + std::to_string(line_no) + ": empty key");
    (*current)[key] = parse_value(line.substr(eq + 1), line_no);
  }
  return doc;
}

TomlDoc parse_toml_file(const std::string& path) { return parse_toml(read_file_bytes(path)); }

RunConfig RunConfig::from_file(const std::string& path) { return from_doc(parse_toml_file(path)); }

RunConfig RunConfig::from_doc(const TomlDoc& doc) {
  RunConfig c;

  c.data.source = string_or(doc, "data", "source", c.data.source);
  c.data.csv_path = string_or(doc, "data", "csv", c.data.csv_path);
  c.data.signals = string_or(doc, "data", "signals", c.data.signals);
  c.data.signals_csv = string_or(doc, "data", "signals_csv", c.data.signals_csv);
  c.data.lookback = static_cast<int>(int_or(doc, "data", "lookback", c.data.lookback));
  if (doc.has("data", "tickers"))
    for (const TomlValue& v : doc.get("data", "tickers").as_array("data.tickers"))
      c.data.tickers.push_back(v.as_string("data.tickers"));

  c.synthetic.n_stocks = static_cast<int>(int_or(doc, "synthetic", "n_stocks", c.synthetic.n_stocks));
  c.synthetic.n_days = static_cast<int>(int_or(doc, "synthetic", "n_days", c.synthetic.n_days));
  c.synthetic.seed = static_cast<std::uint64_t>(int_or(doc, "synthetic", "seed", 0));
  c.synthetic.drift = double_list_or(doc, "synthetic", "drift", c.synthetic.drift);
  c.synthetic.volatility = double_list_or(doc, "synthetic", "volatility", c.synthetic.volatility);
  c.synthetic.signal_quality = number_or(doc, "synthetic", "signal_quality", c.synthetic.signal_quality);

  c.env.initial_capital = number_or(doc, "env", "initial_capital", c.env.initial_capital);
  c.env.cost_rate = number_or(doc, "env", "cost_rate", c.env.cost_rate);
  c.env.h_max = static_cast<int>(int_or(doc, "env", "h_max", c.env.h_max));
  c.env.reward_scale = number_or(doc, "env", "reward_scale", c.env.reward_scale);

  c.ppo.learning_rate = number_or(doc, "ppo", "learning_rate", c.ppo.learning_rate);
  c.ppo.clip_eps = number_or(doc, "ppo", "clip_eps", c.ppo.clip_eps);
  c.ppo.gamma = number_or(doc, "ppo", "gamma", c.ppo.gamma);
  c.ppo.gae_lambda = number_or(doc, "ppo", "gae_lambda", c.ppo.gae_lambda);
  c.ppo.epochs = static_cast<int>(int_or(doc, "ppo", "epochs", c.ppo.epochs));
  c.ppo.minibatch_size = static_cast<int>(int_or(doc, "ppo", "minibatch_size", c.ppo.minibatch_size));
  c.ppo.entropy_coef = number_or(doc, "ppo", "entropy_coef", c.ppo.entropy_coef);
  c.ppo.max_grad_norm = number_or(doc, "ppo", "max_grad_norm", c.ppo.max_grad_norm);
  c.ppo.fr_input_scale = number_or(doc, "ppo", "fr_input_scale", c.ppo.fr_input_scale);
  c.ppo.hidden = int_list_or(doc, "ppo", "hidden", c.ppo.hidden);

  c.ddpg.actor_lr = number_or(doc, "ddpg", "actor_lr", c.ddpg.actor_lr);
  c.ddpg.critic_lr = number_or(doc, "ddpg", "critic_lr", c.ddpg.critic_lr);
  c.ddpg.tau = number_or(doc, "ddpg", "tau", c.ddpg.tau);
  c.ddpg.gamma = number_or(doc, "ddpg", "gamma", c.ddpg.gamma);
  c.ddpg.batch_size = static_cast<int>(int_or(doc, "ddpg", "batch_size", c.ddpg.batch_size));
  c.ddpg.buffer_capacity =
      static_cast<std::size_t>(int_or(doc, "ddpg", "buffer_capacity", static_cast<std::int64_t>(c.ddpg.buffer_capacity)));
  c.ddpg.noise_sigma = number_or(doc, "ddpg", "noise_sigma", c.ddpg.noise_sigma);
  c.ddpg.noise_decay = number_or(doc, "ddpg", "noise_decay", c.ddpg.noise_decay);
  c.ddpg.update_every = static_cast<int>(int_or(doc, "ddpg", "update_every", c.ddpg.update_every));
  c.ddpg.max_grad_norm = number_or(doc, "ddpg", "max_grad_norm", c.ddpg.max_grad_norm);
  c.ddpg.hidden = int_list_or(doc, "ddpg", "hidden", c.ddpg.hidden);

  c.schedule.hlc_episodes = static_cast<int>(int_or(doc, "schedule", "hlc_episodes", c.schedule.hlc_episodes));
  c.schedule.llc_episodes = static_cast<int>(int_or(doc, "schedule", "llc_episodes", c.schedule.llc_episodes));
  c.schedule.phase3_block = static_cast<int>(int_or(doc, "schedule", "phase3_block", c.schedule.phase3_block));
  c.schedule.switch_growth = number_or(doc, "schedule", "switch_growth", c.schedule.switch_growth);
  c.schedule.max_phase3_episodes =
      static_cast<int>(int_or(doc, "schedule", "max_phase3_episodes", c.schedule.max_phase3_episodes));
  c.schedule.convergence_window =
      static_cast<int>(int_or(doc, "schedule", "convergence_window", c.schedule.convergence_window));
  c.schedule.convergence_tol = number_or(doc, "schedule", "convergence_tol", c.schedule.convergence_tol);
  c.schedule.total_timesteps = int_or(doc, "schedule", "total_timesteps", c.schedule.total_timesteps);
  c.schedule.alpha0 = number_or(doc, "schedule", "alpha0", c.schedule.alpha0);
  c.schedule.lambda = number_or(doc, "schedule", "lambda", c.schedule.lambda);
  c.schedule.checkpoint_every =
      static_cast<int>(int_or(doc, "schedule", "checkpoint_every", c.schedule.checkpoint_every));

  c.train_strategy = string_or(doc, "train", "strategy", c.train_strategy);

  c.run.out_dir = string_or(doc, "run", "out_dir", c.run.out_dir);
  if (doc.has("run", "seeds")) {
    c.run.seeds.clear();
    for (const TomlValue& v : doc.get("run", "seeds").as_array("run.seeds"))
      c.run.seeds.push_back(static_cast<std::uint64_t>(v.as_int("run.seeds")));
  }
  if (!c.run.seeds.empty()) c.schedule.seed = c.run.seeds.front();
  return c;
}

void RunConfig::validate(bool check_paths) const {
  if (data.source != "synthetic" && data.source != "csv")
    bad("data.source must be \"synthetic\" or \"csv\"");
  if (data.source == "csv" && data.csv_path.empty()) bad("data.csv is required when data.source = \"csv\"");
  if (data.source == "synthetic" && !data.csv_path.empty())
    bad("exactly one data source: remove data.csv or set data.source = \"csv\"");

  const std::string sig = data.signals.empty() ? (data.source == "synthetic" ? "synthetic" : "baseline")
                                               : data.signals;
  if (sig != "synthetic" && sig != "baseline" && sig != "csv")
    bad("data.signals must be \"baseline\", \"csv\" or \"synthetic\"");
  if (sig == "synthetic" && data.source != "synthetic")
    bad("data.signals = \"synthetic\" requires synthetic data");
  if (sig == "csv" && data.signals_csv.empty()) bad("data.signals_csv is required when data.signals = \"csv\"");
  if (data.lookback < 1) bad("data.lookback must be >= 1");

  if (train_strategy != "hrt" && train_strategy != "ddpg_only")
    bad("train.strategy must be \"hrt\" or \"ddpg_only\"");
  if (run.seeds.empty()) bad("run.seeds must not be empty");

  try {
    if (data.source == "synthetic") synthetic.validate();
    env.validate();
    ppo.validate();
    ddpg.validate();
    schedule.validate();
  } catch (const Error& e) {
    bad(e.what());
  }

  if (check_paths) {
    if (data.source == "csv" && !std::filesystem::exists(data.csv_path))
      bad("data.csv path does not exist: " + data.csv_path);
    if (sig == "csv" && !std::filesystem::exists(data.signals_csv))
      bad("data.signals_csv path does not exist: " + data.signals_csv);
  }
}

std::string RunConfig::resolved_toml() const {
  std::string out;
  auto kv_str = [&](const char* k, const std::string& v) {
    out += k;
    out += " = \"";
    out += v;
    out += "\"\n";
  };
  auto kv_num = [&](const char* k, double v) {
    out += k;
    out += " = ";
    append_number(out, v);
    out += '\n';
  };
  auto kv_int = [&](const char* k, std::int64_t v) {
    out += k;
    out += " = ";
    out += std::to_string(v);
    out += '\n';
  };
  auto kv_ints = [&](const char* k, const std::vector<int>& vs) {
    out += k;
    out += " = [";
    for (std::size_t i = 0; i < vs.size(); ++i) {
      if (i) out += ", ";
      out += std::to_string(vs[i]);
    }
    out += "]\n";
  };

  out += "[data]\n";
  kv_str("source", data.source);
  if (!data.csv_path.empty()) kv_str("csv", data.csv_path);
  if (!data.tickers.empty()) {
    out += "tickers = [";
    for (std::size_t i = 0; i < data.tickers.size(); ++i) {
      if (i) out += ", ";
      out += '"' + data.tickers[i] + '"';
    }
    out += "]\n";
  }
  kv_str("signals", data.signals.empty() ? (data.source == "synthetic" ? "synthetic" : "baseline") : data.signals);
  if (!data.signals_csv.empty()) kv_str("signals_csv", data.signals_csv);
  kv_int("lookback", data.lookback);

  if (data.source == "synthetic") {
    out += "\n[synthetic]\n";
    kv_int("n_stocks", synthetic.n_stocks);
    kv_int("n_days", synthetic.n_days);
    kv_int("seed", static_cast<std::int64_t>(synthetic.seed));
    out += "drift = [";
    for (std::size_t i = 0; i < synthetic.drift.size(); ++i) {
      if (i) out += ", ";
      append_number(out, synthetic.drift[i]);
    }
    out += "]\nvolatility = [";
    for (std::size_t i = 0; i < synthetic.volatility.size(); ++i) {
      if (i) out += ", ";
      append_number(out, synthetic.volatility[i]);
    }
    out += "]\n";
    kv_num("signal_quality", synthetic.signal_quality);
  }

  out += "\n[env]\n";
  kv_num("initial_capital", env.initial_capital);
  kv_num("cost_rate", env.cost_rate);
  kv_int("h_max", env.h_max);
  kv_num("reward_scale", env.reward_scale);

  out += "\n[ppo]\n";
  kv_num("learning_rate", ppo.learning_rate);
  kv_num("clip_eps", ppo.clip_eps);
  kv_num("gamma", ppo.gamma);
  kv_num("gae_lambda", ppo.gae_lambda);
  kv_int("epochs", ppo.epochs);
  kv_int("minibatch_size", ppo.minibatch_size);
  kv_num("entropy_coef", ppo.entropy_coef);
  kv_num("max_grad_norm", ppo.max_grad_norm);
  kv_num("fr_input_scale", ppo.fr_input_scale);
  kv_ints("hidden", ppo.hidden);

  out += "\n[ddpg]\n";
  kv_num("actor_lr", ddpg.actor_lr);
  kv_num("critic_lr", ddpg.critic_lr);
  kv_num("tau", ddpg.tau);
  kv_num("gamma", ddpg.gamma);
  kv_int("batch_size", ddpg.batch_size);
  kv_int("buffer_capacity", static_cast<std::int64_t>(ddpg.buffer_capacity));
  kv_num("noise_sigma", ddpg.noise_sigma);
  kv_num("noise_decay", ddpg.noise_decay);
  kv_int("update_every", ddpg.update_every);
  kv_num("max_grad_norm", ddpg.max_grad_norm);
  kv_ints("hidden", ddpg.hidden);

  out += "\n[schedule]\n";
  kv_int("hlc_episodes", schedule.hlc_episodes);
  kv_int("llc_episodes", schedule.llc_episodes);
  kv_int("phase3_block", schedule.phase3_block);
  kv_num("switch_growth", schedule.switch_growth);
  kv_int("max_phase3_episodes", schedule.max_phase3_episodes);
  kv_int("convergence_window", schedule.convergence_window);
  kv_num("convergence_tol", schedule.convergence_tol);
  kv_int("total_timesteps", schedule.total_timesteps);
  kv_num("alpha0", schedule.alpha0);
  kv_num("lambda", schedule.lambda);
  kv_int("checkpoint_every", schedule.checkpoint_every);

  out += "\n[train]\n";
  kv_str("strategy", train_strategy);

  out += "\n[run]\n";
  kv_str("out_dir", run.out_dir);
  out += "seeds = [";
  for (std::size_t i = 0; i < run.seeds.size(); ++i) {
    if (i) out += ", ";
    out += std::to_string(run.seeds[i]);
  }
  out += "]\n";
  return out;
}

std::pair<MarketFrame, SignalPanel> load_market(const RunConfig& cfg) {
  MarketFrame frame;
  SignalPanel signals;
  if (cfg.data.source == "synthetic") {
    auto generated = generate_synthetic(cfg.synthetic);
    frame = std::move(generated.first);
    signals = std::move(generated.second);
  } else {
    frame = load_csv(cfg.data.csv_path, cfg.data.tickers);
  }
  frame = compute_vwap(std::move(frame));

  const std::string sig = cfg.data.signals.empty()
                              ? (cfg.data.source == "synthetic" ? "synthetic" : "baseline")
                              : cfg.data.signals;
  if (sig == "baseline")
    signals = baseline_signals(frame, cfg.data.lookback);
  else if (sig == "csv")
    signals = load_signals_csv(cfg.data.signals_csv, frame);
  // "synthetic": panel already produced alongside the frame
  return {std::move(frame), std::move(signals)};
}

}  // namespace hrt
