#include "sharplab/config.hpp"

#include <fstream>
#include <sstream>
#include <stdexcept>

namespace sharplab {

namespace {

std::string trim(const std::string& s) {
    const auto a = s.find_first_not_of(" \t\r");
    if (a == std::string::npos) return "";
    const auto b = s.find_last_not_of(" \t\r");
    return s.substr(a, b - a + 1);
}

[[noreturn]] void bad_key(const std::string& section, const std::string& key) {
    throw std::invalid_argument("config: unknown key [" + section + "] " + key);
}

}  // namespace

std::vector<double> parse_double_list(const std::string& s) {
    std::vector<double> out;
    std::stringstream ss(s);
    std::string cell;
    while (std::getline(ss, cell, ',')) {
        cell = trim(cell);
        if (!cell.empty()) out.push_back(std::stod(cell));
    }
    return out;
}

RunConfig parse_config_text(const std::string& text) {
    RunConfig cfg;
    std::istringstream in(text);
    std::string line, section;
    std::size_t lineno = 0;
    while (std::getline(in, line)) {
        ++lineno;
        line = trim(line);
        if (line.empty() || line[0] == '#' || line[0] == ';') continue;
        if (line.front() == '[') {
            if (line.back() != ']')
                throw std::invalid_argument("config: bad section header at line " +
                                            std::to_string(lineno));
            section = line.substr(1, line.size() - 2);
            if (section != "dataset" && section != "train" && section != "attack" &&
                section != "sweep" && section != "certify" && section != "analysis" &&
                section != "model" && section != "output")
                throw std::invalid_argument("config: unknown section [" + section + "]");
            continue;
        }
        const auto eq = line.find('=');
        if (eq == std::string::npos)
            throw std::invalid_argument("config: expected key=value at line " +
                                        std::to_string(lineno));
        const std::string key = trim(line.substr(0, eq));
        const std::string value = trim(line.substr(eq + 1));

        if (section == "dataset") {
            if (key == "kind") cfg.dataset.kind = parse_dataset_kind(value);
            else if (key == "n") cfg.dataset.n = std::stoul(value);
            else if (key == "classes") cfg.dataset.classes = std::stoul(value);
            else if (key == "dim") cfg.dataset.dim = std::stoul(value);
            else if (key == "noise") cfg.dataset.noise = std::stod(value);
            else if (key == "seed") cfg.dataset.seed = std::stoull(value);
            else if (key == "path") cfg.dataset.path = value;
            else bad_key(section, key);
        } else if (section == "train") {
            if (key == "epochs") cfg.train.epochs = std::stoul(value);
            else if (key == "batch_size") cfg.train.batch_size = std::stoul(value);
            else if (key == "learning_rate") cfg.train.learning_rate = std::stod(value);
            else if (key == "weight_decay") cfg.train.weight_decay = std::stod(value);
            else if (key == "seed") cfg.train.seed = std::stoull(value);
            else if (key == "loss") {
                if (value != "cross_entropy")
                    throw std::invalid_argument("config: unsupported training loss " + value);
            } else bad_key(section, key);
        } else if (section == "attack") {
            if (key == "norm") {
                if (value == "l2") cfg.attack.norm = AttackNorm::l2;
                else if (value == "linf") cfg.attack.norm = AttackNorm::linf;
                else throw std::invalid_argument("config: unknown attack norm " + value);
            }
            else if (key == "epsilon") cfg.attack.epsilon = std::stod(value);
            else if (key == "step_size") cfg.attack.step_size = std::stod(value);
            else if (key == "steps") cfg.attack.steps = std::stoul(value);
            else if (key == "seed") cfg.attack.seed = std::stoull(value);
            else if (key == "random_start") cfg.attack.random_start = value == "true";
            else bad_key(section, key);
        } else if (section == "sweep") {
            if (key == "scales") cfg.scales = parse_double_list(value);
            else bad_key(section, key);
        } else if (section == "certify") {
            if (key == "epsilon") cfg.certify_epsilon = std::stod(value);
            else bad_key(section, key);
        } else if (section == "analysis") {
            if (key == "take_off_tau") cfg.take_off_tau = std::stod(value);
            else if (key == "detector_folds") cfg.detector_folds = std::stoul(value);
            else bad_key(section, key);
        } else if (section == "model") {
            if (key == "hidden_dims") {
                cfg.hidden_dims.clear();
                for (double v : parse_double_list(value))
                    cfg.hidden_dims.push_back(static_cast<std::size_t>(v));
            } else bad_key(section, key);
        } else if (section == "output") {
            if (key == "dir") cfg.out_dir = value;
            else if (key == "seed") cfg.seed = std::stoull(value);
            else bad_key(section, key);
        } else {
            throw std::invalid_argument("config: key outside any section at line " +
                                        std::to_string(lineno));
        }
    }
    return cfg;
}

RunConfig parse_config_file(const std::string& path) {
    std::ifstream in(path);
    if (!in) throw std::runtime_error("config: cannot open " + path);
    std::stringstream ss;
    ss << in.rdbuf();
    return parse_config_text(ss.str());
}

std::string config_to_text(const RunConfig& cfg) {
    std::ostringstream os;
    os << "[dataset]\n"
       << "kind = " << dataset_kind_name(cfg.dataset.kind) << "\n"
       << "n = " << cfg.dataset.n << "\n"
       << "classes = " << cfg.dataset.classes << "\n"
       << "dim = " << cfg.dataset.dim << "\n"
       << "noise = " << cfg.dataset.noise << "\n"
       << "seed = " << cfg.dataset.seed << "\n";
    if (!cfg.dataset.path.empty()) os << "path = " << cfg.dataset.path << "\n";
    os << "\n[model]\nhidden_dims = ";
    for (std::size_t i = 0; i < cfg.hidden_dims.size(); ++i)
        os << (i ? "," : "") << cfg.hidden_dims[i];
    os << "\n\n[train]\n"
       << "epochs = " << cfg.train.epochs << "\n"
       << "batch_size = " << cfg.train.batch_size << "\n"
       << "learning_rate = " << cfg.train.learning_rate << "\n"
       << "weight_decay = " << cfg.train.weight_decay << "\n"
       << "seed = " << cfg.train.seed << "\n"
       << "\n[attack]\n"
       << "norm = " << (cfg.attack.norm == AttackNorm::l2 ? "l2" : "linf") << "\n"
       << "epsilon = " << cfg.attack.epsilon << "\n"
       << "step_size = " << cfg.attack.step_size << "\n"
       << "steps = " << cfg.attack.steps << "\n"
       << "seed = " << cfg.attack.seed << "\n"
       << "random_start = " << (cfg.attack.random_start ? "true" : "false") << "\n"
       << "\n[sweep]\nscales = ";
    for (std::size_t i = 0; i < cfg.scales.size(); ++i) os << (i ? "," : "") << cfg.scales[i];
    os << "\n\n[certify]\nepsilon = " << cfg.certify_epsilon << "\n"
       << "\n[analysis]\n"
       << "take_off_tau = " << cfg.take_off_tau << "\n"
       << "detector_folds = " << cfg.detector_folds << "\n"
       << "\n[output]\n"
       << "dir = " << cfg.out_dir << "\n"
       << "seed = " << cfg.seed << "\n";
    return os.str();
}

}  // namespace sharplab
