#include "pvio/io.hpp"

#include <cctype>
#include <cstdio>
#include <fstream>
#include <sstream>

namespace pvio {

namespace {

std::ifstream open_in(const std::string& path) {
  std::ifstream f(path);
  if (!f) throw ParseError("cannot open " + path);
  return f;
}

std::ofstream open_out(const std::string& path) {
  std::ofstream f(path);
  if (!f) throw ParseError("cannot open " + path + " for writing");
  return f;
}

[[noreturn]] void fail(const std::string& path, int line, const std::string& what) {
  throw ParseError(path + ":" + std::to_string(line) + ": " + what);
}

// split on commas or whitespace, skipping empty tokens
std::vector<std::string> tokenize(const std::string& line) {
  std::vector<std::string> out;
  std::string cur;
  for (char c : line) {
    if (c == ',' || c == ' ' || c == '\t' || c == '\r' || c == '=') {
      if (!cur.empty()) out.push_back(std::move(cur));
      cur.clear();
    } else {
      cur.push_back(c);
    }
  }
  if (!cur.empty()) out.push_back(std::move(cur));
  return out;
}

double to_double(const std::string& s, const std::string& path, int line) {
  try {
    size_t pos = 0;
    const double v = std::stod(s, &pos);
    if (pos != s.size()) throw std::invalid_argument(s);
    return v;
  } catch (const std::exception&) {
    fail(path, line, "not a number: '" + s + "'");
  }
}

bool is_comment_or_blank(const std::string& line) {
  for (char c : line) {
    if (c == '#') return true;
    if (c != ' ' && c != '\t' && c != '\r') return false;
  }
  return true;
}

bool looks_like_header(const std::vector<std::string>& tok) {
  return !tok.empty() && !tok[0].empty() &&
         !(std::isdigit(static_cast<unsigned char>(tok[0][0])) || tok[0][0] == '-' ||
           tok[0][0] == '+' || tok[0][0] == '.');
}

}  // namespace

std::vector<ImuSample> read_imu_csv(const std::string& path) {
  auto f = open_in(path);
  std::vector<ImuSample> out;
  std::string line;
  int ln = 0;
  while (std::getline(f, line)) {
    ++ln;
    if (is_comment_or_blank(line)) continue;
    const auto tok = tokenize(line);
    if (ln == 1 && looks_like_header(tok)) continue;
    if (tok.size() != 7) fail(path, ln, "expected 7 fields");
    ImuSample s;
    s.t = to_double(tok[0], path, ln);
    for (int i = 0; i < 3; ++i) s.accel(i) = to_double(tok[1 + i], path, ln);
    for (int i = 0; i < 3; ++i) s.gyro(i) = to_double(tok[4 + i], path, ln);
    if (!out.empty() && s.t <= out.back().t) fail(path, ln, "timestamps must increase");
    out.push_back(s);
  }
  return out;
}

void write_imu_csv(const std::string& path, const std::vector<ImuSample>& samples) {
  auto f = open_out(path);
  f << "t,ax,ay,az,gx,gy,gz\n";
  char buf[256];
  for (const auto& s : samples) {
    std::snprintf(buf, sizeof(buf), "%.9f,%.17g,%.17g,%.17g,%.17g,%.17g,%.17g\n", s.t,
                  s.accel.x(), s.accel.y(), s.accel.z(), s.gyro.x(), s.gyro.y(), s.gyro.z());
    f << buf;
  }
}

std::vector<FlowMeasurement> read_measurement_csv(const std::string& path) {
  auto f = open_in(path);
  std::vector<FlowMeasurement> out;
  std::string line;
  int ln = 0;
  while (std::getline(f, line)) {
    ++ln;
    if (is_comment_or_blank(line)) continue;
    const auto tok = tokenize(line);
    if (ln == 1 && looks_like_header(tok)) continue;
    if (tok.size() != 17 && tok.size() != 18) fail(path, ln, "expected 17 or 18 fields");
    FlowMeasurement m;
    m.t = to_double(tok[0], path, ln);
    Eigen::Matrix<double, 8, 1> diag;
    for (int i = 0; i < 8; ++i) m.flow(i) = to_double(tok[1 + i], path, ln);
    for (int i = 0; i < 8; ++i) diag(i) = to_double(tok[9 + i], path, ln);
    m.r_net = FlowCovariance::FromDiagonal(diag);
    m.used_prior = tok.size() == 18 && to_double(tok[17], path, ln) != 0.0;
    if (!out.empty() && m.t <= out.back().t) fail(path, ln, "timestamps must increase");
    out.push_back(m);
  }
  return out;
}

void write_measurement_csv(const std::string& path, const std::vector<FlowMeasurement>& meas) {
  auto f = open_out(path);
  f << "t,f1u,f1v,f2u,f2v,f3u,f3v,f4u,f4v,s1,s2,s3,s4,s5,s6,s7,s8,used_prior\n";
  char buf[64];
  for (const auto& m : meas) {
    std::snprintf(buf, sizeof(buf), "%.9f", m.t);
    f << buf;
    for (int i = 0; i < 8; ++i) {
      std::snprintf(buf, sizeof(buf), ",%.17g", m.flow(i));
      f << buf;
    }
    for (int i = 0; i < 8; ++i) {
      std::snprintf(buf, sizeof(buf), ",%.17g", m.r_net.matrix()(i, i));
      f << buf;
    }
    f << ',' << (m.used_prior ? 1 : 0) << '\n';
  }
}

Trajectory read_tum(const std::string& path) {
  auto f = open_in(path);
  Trajectory out;
  std::string line;
  int ln = 0;
  while (std::getline(f, line)) {
    ++ln;
    if (is_comment_or_blank(line)) continue;
    const auto tok = tokenize(line);
    if (tok.size() != 8) fail(path, ln, "expected 8 fields (t x y z qx qy qz qw)");
    TrajectoryPoint p;
    p.t = to_double(tok[0], path, ln);
    for (int i = 0; i < 3; ++i) p.position(i) = to_double(tok[1 + i], path, ln);
    const double qx = to_double(tok[4], path, ln);
    const double qy = to_double(tok[5], path, ln);
    const double qz = to_double(tok[6], path, ln);
    const double qw = to_double(tok[7], path, ln);
    p.attitude = Eigen::Quaterniond(qw, qx, qy, qz).normalized();
    try {
      out.push_back(p);
    } catch (const NonMonotoneTime&) {
      fail(path, ln, "timestamps must increase");
    }
  }
  return out;
}

void write_tum(const std::string& path, const Trajectory& traj) {
  auto f = open_out(path);
  char buf[320];
  for (const auto& p : traj.points) {
    std::snprintf(buf, sizeof(buf), "%.9f %.17g %.17g %.17g %.17g %.17g %.17g %.17g\n", p.t,
                  p.position.x(), p.position.y(), p.position.z(), p.attitude.x(),
                  p.attitude.y(), p.attitude.z(), p.attitude.w());
    f << buf;
  }
}

std::vector<ErrorVariancePair> read_error_variance_csv(const std::string& path) {
  auto f = open_in(path);
  std::vector<ErrorVariancePair> out;
  std::string line;
  int ln = 0;
  while (std::getline(f, line)) {
    ++ln;
    if (is_comment_or_blank(line)) continue;
    const auto tok = tokenize(line);
    if (ln == 1 && looks_like_header(tok)) continue;
    if (tok.size() != 2) fail(path, ln, "expected 2 fields (error,variance)");
    out.push_back({to_double(tok[0], path, ln), to_double(tok[1], path, ln)});
  }
  return out;
}

void write_error_variance_csv(const std::string& path,
                              const std::vector<ErrorVariancePair>& pairs) {
  auto f = open_out(path);
  f << "error,variance\n";
  char buf[96];
  for (const auto& p : pairs) {
    std::snprintf(buf, sizeof(buf), "%.17g,%.17g\n", p.error, p.variance);
    f << buf;
  }
}

namespace {

struct KeyValues {
  std::vector<std::pair<std::string, std::vector<double>>> entries;
  std::vector<int> lines;
  std::string path;

  // values for a key, or nullptr; checks arity when found
  const std::vector<double>* find(const std::string& key, size_t arity) const {
    for (size_t i = 0; i < entries.size(); ++i) {
      if (entries[i].first == key) {
        if (entries[i].second.size() != arity) {
          fail(path, lines[i], key + " expects " + std::to_string(arity) + " value(s)");
        }
        return &entries[i].second;
      }
    }
    return nullptr;
  }

  void set_if(const std::string& key, double& target) const {
    if (const auto* v = find(key, 1)) target = (*v)[0];
  }
  void set_if(const std::string& key, bool& target) const {
    if (const auto* v = find(key, 1)) target = (*v)[0] != 0.0;
  }
  void set_if(const std::string& key, int& target) const {
    if (const auto* v = find(key, 1)) target = static_cast<int>((*v)[0]);
  }
  void set_if(const std::string& key, uint64_t& target) const {
    if (const auto* v = find(key, 1)) target = static_cast<uint64_t>((*v)[0]);
  }
};

KeyValues parse_key_values(const std::string& path,
                           const std::vector<std::string>& known_scalar_keys,
                           const std::vector<std::string>& known_string_keys,
                           std::vector<std::pair<std::string, std::string>>* strings) {
  auto f = open_in(path);
  KeyValues out;
  out.path = path;
  std::string line;
  int ln = 0;
  while (std::getline(f, line)) {
    ++ln;
    if (is_comment_or_blank(line)) continue;
    const auto tok = tokenize(line);
    if (tok.empty()) continue;
    const std::string& key = tok[0];
    bool known = false;
    for (const auto& k : known_string_keys) {
      if (k == key) {
        if (tok.size() != 2) fail(path, ln, key + " expects one value");
        strings->emplace_back(key, tok[1]);
        known = true;
        break;
      }
    }
    if (known) continue;
    for (const auto& k : known_scalar_keys) {
      if (k == key) {
        known = true;
        break;
      }
    }
    if (!known) fail(path, ln, "unknown key '" + key + "'");
    if (tok.size() < 2) fail(path, ln, key + " has no value");
    std::vector<double> vals;
    for (size_t i = 1; i < tok.size(); ++i) vals.push_back(to_double(tok[i], path, ln));
    out.entries.emplace_back(key, std::move(vals));
    out.lines.push_back(ln);
  }
  return out;
}

const std::vector<std::string> kConfigKeys = {
    "fx", "fy", "cx", "cy", "width", "height", "q_ci", "t_ic", "gravity", "z_axis_up",
    "sigma_a", "sigma_g", "sigma_ba", "sigma_bg", "sigma_p", "k_var", "gate",
    "init_sigma_p", "init_sigma_theta", "init_sigma_v", "init_sigma_ba", "init_sigma_bg",
    "init_accel_var_limit"};

const std::vector<std::string> kScenarioKeys = {
    "amplitude", "period", "height_m", "yaw_rate", "duration", "seed",
    "base_sigma", "flow_scale", "outlier_prob", "outlier_sigma", "variance_fidelity",
    "frame_drop_prob", "noise_seed", "imu_rate", "fps"};

}  // namespace

FilterConfig read_filter_config(const std::string& path) {
  std::vector<std::pair<std::string, std::string>> strings;
  const KeyValues kv = parse_key_values(path, kConfigKeys, {}, &strings);
  FilterConfig cfg;
  kv.set_if("fx", cfg.intrinsics.fx);
  kv.set_if("fy", cfg.intrinsics.fy);
  kv.set_if("cx", cfg.intrinsics.cx);
  kv.set_if("cy", cfg.intrinsics.cy);
  kv.set_if("width", cfg.intrinsics.width);
  kv.set_if("height", cfg.intrinsics.height);
  if (const auto* q = kv.find("q_ci", 4)) {
    cfg.q_CI = Eigen::Quaterniond((*q)[0], (*q)[1], (*q)[2], (*q)[3]).normalized();
  }
  if (const auto* t = kv.find("t_ic", 3)) cfg.t_IC = Eigen::Vector3d((*t)[0], (*t)[1], (*t)[2]);
  kv.set_if("gravity", cfg.gravity);
  kv.set_if("z_axis_up", cfg.z_axis_up);
  kv.set_if("sigma_a", cfg.sigma_a);
  kv.set_if("sigma_g", cfg.sigma_g);
  kv.set_if("sigma_ba", cfg.sigma_ba);
  kv.set_if("sigma_bg", cfg.sigma_bg);
  kv.set_if("sigma_p", cfg.sigma_p);
  kv.set_if("k_var", cfg.k_var);
  kv.set_if("gate", cfg.gate);
  kv.set_if("init_sigma_p", cfg.init_sigma_p);
  kv.set_if("init_sigma_theta", cfg.init_sigma_theta);
  kv.set_if("init_sigma_v", cfg.init_sigma_v);
  kv.set_if("init_sigma_ba", cfg.init_sigma_ba);
  kv.set_if("init_sigma_bg", cfg.init_sigma_bg);
  kv.set_if("init_accel_var_limit", cfg.init_accel_var_limit);
  return cfg;
}

void write_filter_config(const std::string& path, const FilterConfig& cfg) {
  auto f = open_out(path);
  f << "fx " << cfg.intrinsics.fx << "\nfy " << cfg.intrinsics.fy << "\ncx "
    << cfg.intrinsics.cx << "\ncy " << cfg.intrinsics.cy << "\nwidth " << cfg.intrinsics.width
    << "\nheight " << cfg.intrinsics.height << "\n";
  f << "q_ci " << cfg.q_CI.w() << ' ' << cfg.q_CI.x() << ' ' << cfg.q_CI.y() << ' '
    << cfg.q_CI.z() << "\n";
  f << "t_ic " << cfg.t_IC.x() << ' ' << cfg.t_IC.y() << ' ' << cfg.t_IC.z() << "\n";
  f << "gravity " << cfg.gravity << "\nz_axis_up " << (cfg.z_axis_up ? 1 : 0) << "\n";
  f << "sigma_a " << cfg.sigma_a << "\nsigma_g " << cfg.sigma_g << "\nsigma_ba " << cfg.sigma_ba
    << "\nsigma_bg " << cfg.sigma_bg << "\nsigma_p " << cfg.sigma_p << "\n";
  f << "k_var " << cfg.k_var << "\ngate " << (cfg.gate ? 1 : 0) << "\n";
  f << "init_sigma_p " << cfg.init_sigma_p << "\ninit_sigma_theta " << cfg.init_sigma_theta
    << "\ninit_sigma_v " << cfg.init_sigma_v << "\ninit_sigma_ba " << cfg.init_sigma_ba
    << "\ninit_sigma_bg " << cfg.init_sigma_bg << "\ninit_accel_var_limit "
    << cfg.init_accel_var_limit << "\n";
}

ScenarioSpec read_scenario(const std::string& path) {
  std::vector<std::pair<std::string, std::string>> strings;
  const KeyValues kv = parse_key_values(path, kScenarioKeys, {"kind"}, &strings);
  ScenarioSpec s;
  for (const auto& [k, v] : strings) {
    if (k == "kind") s.trajectory.kind = trajectory_kind_from_string(v);
  }
  kv.set_if("amplitude", s.trajectory.amplitude);
  kv.set_if("period", s.trajectory.period);
  kv.set_if("height_m", s.trajectory.height);
  kv.set_if("yaw_rate", s.trajectory.yaw_rate);
  kv.set_if("duration", s.trajectory.duration);
  kv.set_if("seed", s.trajectory.seed);
  kv.set_if("base_sigma", s.noise.base_sigma);
  kv.set_if("flow_scale", s.noise.flow_scale);
  kv.set_if("outlier_prob", s.noise.outlier_prob);
  kv.set_if("outlier_sigma", s.noise.outlier_sigma);
  kv.set_if("variance_fidelity", s.noise.variance_fidelity);
  kv.set_if("frame_drop_prob", s.noise.frame_drop_prob);
  kv.set_if("noise_seed", s.noise.seed);
  kv.set_if("imu_rate", s.imu_rate);
  kv.set_if("fps", s.fps);
  return s;
}

void write_scenario(const std::string& path, const ScenarioSpec& s) {
  auto f = open_out(path);
  const char* kind = "hover";
  switch (s.trajectory.kind) {
    case TrajectoryKind::Hover: kind = "hover"; break;
    case TrajectoryKind::Line: kind = "line"; break;
    case TrajectoryKind::Circle: kind = "circle"; break;
    case TrajectoryKind::FigureEight: kind = "figure-eight"; break;
    case TrajectoryKind::Shuttle: kind = "shuttle"; break;
  }
  f << "kind " << kind << "\namplitude " << s.trajectory.amplitude << "\nperiod "
    << s.trajectory.period << "\nheight_m " << s.trajectory.height << "\nyaw_rate "
    << s.trajectory.yaw_rate << "\nduration " << s.trajectory.duration << "\nseed "
    << s.trajectory.seed << "\n";
  f << "base_sigma " << s.noise.base_sigma << "\nflow_scale " << s.noise.flow_scale
    << "\noutlier_prob " << s.noise.outlier_prob << "\noutlier_sigma " << s.noise.outlier_sigma
    << "\nvariance_fidelity " << s.noise.variance_fidelity << "\nframe_drop_prob "
    << s.noise.frame_drop_prob << "\nnoise_seed " << s.noise.seed << "\n";
  f << "imu_rate " << s.imu_rate << "\nfps " << s.fps << "\n";
}

}  // namespace pvio
