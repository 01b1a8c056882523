#include "parrot/metrics.hpp"

#include <cmath>
#include <cstdio>
#include <fstream>
#include <sstream>
#include <stdexcept>

namespace parrot::harness {

namespace {

std::string fmt(double v) {
    char buf[40];
    std::snprintf(buf, sizeof(buf), "%.17g", v);
    return buf;
}

} // namespace

void write_metrics_csv(const std::string& path, const rl::MetricsLog& log) {
    std::string tmp = path + ".tmp";
    {
        std::ofstream os(tmp, std::ios::trunc);
        if (!os) throw std::runtime_error("metrics: cannot write " + tmp);
        os << "# method=" << log.method << "\n";
        os << "# task=" << log.task << "\n";
        os << "# seed=" << log.seed << "\n";
        os << "# schema=" << log.schema << "\n";
        os << "# config_hash=" << log.config_hash << "\n";
        os << "# dataset_hash=" << log.dataset_hash << "\n";
        os << "env_step,eval_success_rate,mean_episode_return,actor_loss,critic_loss,alpha\n";
        long prev = -1;
        for (const auto& r : log.rows) {
            if (r.env_step <= prev)
                throw std::runtime_error("metrics: rows not strictly increasing in env_step");
            prev = r.env_step;
            os << r.env_step << "," << fmt(r.eval_success_rate) << ","
               << fmt(r.mean_episode_return) << "," << fmt(r.actor_loss) << ","
               << fmt(r.critic_loss) << "," << fmt(r.alpha) << "\n";
        }
        if (!os) throw std::runtime_error("metrics: write failed for " + tmp);
    }
    if (std::rename(tmp.c_str(), path.c_str()) != 0)
        throw std::runtime_error("metrics: cannot move " + tmp + " into place");
}

rl::MetricsLog read_metrics_csv(const std::string& path) {
    std::ifstream is(path);
    if (!is) throw std::runtime_error("metrics: cannot open " + path);
    rl::MetricsLog log;
    std::string line;
    bool header_seen = false;
    while (std::getline(is, line)) {
        if (line.empty()) continue;
        if (line[0] == '#') {
            auto eq = line.find('=');
            if (eq == std::string::npos) continue;
            std::string key = line.substr(2, eq - 2);
            std::string val = line.substr(eq + 1);
            if (key == "method")
                log.method = val;
            else if (key == "task")
                log.task = val;
            else if (key == "seed")
                log.seed = std::stoull(val);
            else if (key == "schema")
                log.schema = val;
            else if (key == "config_hash")
                log.config_hash = val;
            else if (key == "dataset_hash")
                log.dataset_hash = val;
            continue;
        }
        if (!header_seen) {
            if (line.rfind("env_step,", 0) != 0)
                throw std::runtime_error("metrics: unexpected header in " + path);
            header_seen = true;
            continue;
        }
        rl::MetricsRow row;
        std::stringstream ss(line);
        std::string tok;
        std::vector<std::string> cols;
        while (std::getline(ss, tok, ',')) cols.push_back(tok);
        if (cols.size() != 6)
            throw std::runtime_error("metrics: malformed row in " + path + ": " + line);
        row.env_step = std::stol(cols[0]);
        row.eval_success_rate = std::stod(cols[1]);
        row.mean_episode_return = std::stod(cols[2]);
        row.actor_loss = std::stod(cols[3]);
        row.critic_loss = std::stod(cols[4]);
        row.alpha = std::stod(cols[5]);
        log.rows.push_back(row);
    }
    return log;
}

std::vector<CurvePoint> merge_curves(const std::vector<rl::MetricsLog>& logs) {
    if (logs.empty()) throw std::runtime_error("merge_curves: no logs");
    const size_t n_rows = logs[0].rows.size();
    for (const auto& l : logs)
        if (l.rows.size() != n_rows)
            throw std::runtime_error("merge_curves: seed logs have differing row counts");

    std::vector<CurvePoint> out;
    out.reserve(n_rows);
    for (size_t i = 0; i < n_rows; ++i) {
        CurvePoint p;
        p.env_step = logs[0].rows[i].env_step;
        p.n_seeds = static_cast<long>(logs.size());
        double s = 0, s2 = 0, r = 0, r2 = 0;
        for (const auto& l : logs) {
            if (l.rows[i].env_step != p.env_step)
                throw std::runtime_error("merge_curves: env_step mismatch across seeds");
            s += l.rows[i].eval_success_rate;
            s2 += l.rows[i].eval_success_rate * l.rows[i].eval_success_rate;
            r += l.rows[i].mean_episode_return;
            r2 += l.rows[i].mean_episode_return * l.rows[i].mean_episode_return;
        }
        double n = static_cast<double>(logs.size());
        p.mean_success = s / n;
        p.mean_return = r / n;
        if (logs.size() > 1) {
            p.std_success = std::sqrt(std::max(0.0, (s2 - s * s / n) / (n - 1)));
            p.std_return = std::sqrt(std::max(0.0, (r2 - r * r / n) / (n - 1)));
        }
        out.push_back(p);
    }
    return out;
}

void write_curve_csv(const std::string& path, const std::vector<CurvePoint>& curve,
                     const std::string& method, const std::string& task) {
    std::string tmp = path + ".tmp";
    {
        std::ofstream os(tmp, std::ios::trunc);
        if (!os) throw std::runtime_error("metrics: cannot write " + tmp);
        os << "# method=" << method << "\n# task=" << task << "\n";
        os << "env_step,mean_success,std_success,mean_return,std_return,n_seeds\n";
        for (const auto& p : curve)
            os << p.env_step << "," << fmt(p.mean_success) << "," << fmt(p.std_success) << ","
               << fmt(p.mean_return) << "," << fmt(p.std_return) << "," << p.n_seeds << "\n";
    }
    if (std::rename(tmp.c_str(), path.c_str()) != 0)
        throw std::runtime_error("metrics: cannot move " + tmp + " into place");
}

} // namespace parrot::harness
