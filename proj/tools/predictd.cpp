// predictd: training, evaluation and the prediction server.

#include "wordpred/wordpred.hpp"
#include "wordpred/http_service.hpp"

#include <CLI11.hpp>
#include <json.hpp>

#include <atomic>
#include <chrono>
#include <condition_variable>
#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <memory>
#include <mutex>
#include <thread>

namespace fs = std::filesystem;
using namespace wordpred;

namespace {

std::vector<Token> read_tokens(const std::vector<std::string>& files) {
  std::vector<Token> out;
  for (const auto& f : files) {
    auto t = tokenize(read_file(f));
    out.insert(out.end(), std::make_move_iterator(t.begin()), std::make_move_iterator(t.end()));
  }
  return out;
}

std::shared_ptr<const SemanticSpace> load_space(const std::string& path) {
  if (path.empty()) return nullptr;
  return std::make_shared<const SemanticSpace>(SemanticSpace::load(path));
}

std::vector<CombinerConfig> configs_from(const std::string& dir, const std::vector<std::string>& names) {
  std::vector<CombinerConfig> out;
  if (!names.empty()) {
    for (const auto& n : names) {
      const fs::path candidate = fs::path(dir.empty() ? "." : dir) / (n + ".json");
      out.push_back(!dir.empty() && fs::exists(candidate) ? load_config(candidate.string()) : resolve_config(n));
    }
    return out;
  }
  if (!dir.empty()) {
    auto all = load_config_dir(dir);
    for (const auto& n : CombinerConfig::preset_names()) {
      if (auto it = all.find(n); it != all.end()) {
        out.push_back(it->second);
        all.erase(it);
      }
    }
    for (auto& [n, c] : all) out.push_back(c);
    return out;
  }
  for (const auto& n : CombinerConfig::preset_names()) out.push_back(CombinerConfig::preset(n));
  return out;
}

void write_json(const nlohmann::json& j, const std::string& path) {
  std::ofstream out(path);
  if (!out) throw LoadError("cannot write " + path);
  out << j.dump(2) << '\n';
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Word prediction with n-gram and LSA models"};
  app.require_subcommand(1);

  // train-ngram
  auto* tn = app.add_subcommand("train-ngram", "Train a backoff n-gram model and write it as ARPA");
  NGramTrainOptions ngo;
  std::string smoothing = "mkn", tn_out, tn_vocab_out;
  std::vector<std::string> tn_files;
  tn->add_option("--order", ngo.order, "Model order (1-5)")->check(CLI::Range(1, kMaxOrder));
  tn->add_option("--smoothing", smoothing, "mkn or wb")->check(CLI::IsMember({"mkn", "wb"}));
  tn->add_option("--vocab-size", ngo.vocab_size, "Vocabulary cap");
  tn->add_option("--min-count", ngo.min_count, "Minimum word count");
  tn->add_option("--prune", ngo.prune, "Count cutoffs per order, e.g. 1 1 2 2")->delimiter(',');
  tn->add_option("--out", tn_out, "Output ARPA path")->required();
  tn->add_option("--vocab-out", tn_vocab_out, "Also write the vocabulary");
  tn->add_option("corpus", tn_files, "Training text files")->required()->check(CLI::ExistingFile);

  // train-lsa
  auto* tl = app.add_subcommand("train-lsa", "Build an LSA space from a corpus");
  LsaTrainOptions lso;
  std::string tl_stop, tl_out;
  std::vector<std::string> tl_files;
  tl->add_option("--dims", lso.dims, "SVD dimensions");
  tl->add_option("--window", lso.window, "Co-occurrence half width (content words)");
  tl->add_option("--columns", lso.columns, "Number of column words");
  tl->add_option("--vocab-size", lso.vocab_size, "Row vocabulary cap");
  tl->add_option("--min-count", lso.min_count, "Minimum row word count");
  tl->add_option("--density-m", lso.density_m, "Neighbours averaged for density");
  tl->add_option("--seed", lso.svd.seed, "Solver seed");
  tl->add_option("--stopwords", tl_stop, "Stopword file")->check(CLI::ExistingFile);
  tl->add_option("--out", tl_out, "Output space (.lsa text, .lsab binary)")->required();
  tl->add_option("corpus", tl_files, "Training text files")->required()->check(CLI::ExistingFile);

  // evaluate
  auto* ev = app.add_subcommand("evaluate", "KSR and perplexity of one configuration");
  std::string ev_config = "baseline", ev_lm, ev_space, ev_report;
  std::optional<std::size_t> ev_list;
  bool ev_trace = false;
  std::vector<std::string> ev_files;
  ev->add_option("--config", ev_config, "Preset name or JSON file");
  ev->add_option("--lm", ev_lm, "ARPA model")->required()->check(CLI::ExistingFile);
  ev->add_option("--space", ev_space, "LSA space")->check(CLI::ExistingFile);
  ev->add_option("--list-size", ev_list, "Prediction list size");
  ev->add_option("--report", ev_report, "JSON report path");
  ev->add_flag("--trace", ev_trace, "Include the per-word trace in the report");
  ev->add_option("texts", ev_files, "Test texts")->required()->check(CLI::ExistingFile);

  // evaluate-all
  auto* ea = app.add_subcommand("evaluate-all", "Compare configurations on several texts");
  std::string ea_lm, ea_space, ea_configs, ea_report, ea_table;
  std::vector<std::string> ea_names, ea_files;
  std::optional<std::size_t> ea_list;
  ea->add_option("--lm", ea_lm, "ARPA model")->required()->check(CLI::ExistingFile);
  ea->add_option("--space", ea_space, "LSA space")->required()->check(CLI::ExistingFile);
  ea->add_option("--configs", ea_configs, "Directory of config files (default: built-in presets)")
      ->check(CLI::ExistingDirectory);
  ea->add_option("--only", ea_names, "Restrict to these config names")->delimiter(',');
  ea->add_option("--list-size", ea_list, "Prediction list size");
  ea->add_option("--report", ea_report, "JSON report path");
  ea->add_option("--table", ea_table, "Also write the text table here");
  ea->add_option("texts", ea_files, "Test texts")->required()->check(CLI::ExistingFile);

  // predict
  auto* pr = app.add_subcommand("predict", "Top-n predictions for a context");
  std::string pr_config = "baseline", pr_lm, pr_space, pr_context, pr_prefix;
  std::size_t pr_n = 5;
  pr->add_option("--config", pr_config, "Preset name or JSON file");
  pr->add_option("--lm", pr_lm, "ARPA model")->required()->check(CLI::ExistingFile);
  pr->add_option("--space", pr_space, "LSA space")->check(CLI::ExistingFile);
  pr->add_option("--context", pr_context, "Preceding text");
  pr->add_option("--prefix", pr_prefix, "Letters typed so far");
  pr->add_option("-n", pr_n, "List size");

  // presets
  auto* ps = app.add_subcommand("presets", "Write the built-in configurations as JSON files");
  std::string ps_out;
  ps->add_option("--out", ps_out, "Target directory")->required();

  // serve
  auto* sv = app.add_subcommand("serve", "Run the HTTP prediction service");
  std::string sv_lm, sv_space, sv_configs, sv_host = "127.0.0.1", sv_server_config;
  int sv_port = 8080;
  long sv_idle = 1800;
  sv->add_option("--server-config", sv_server_config, "JSON file with lm, space, configs, port, host, idle_timeout")
      ->check(CLI::ExistingFile);
  sv->add_option("--lm", sv_lm, "ARPA model");
  sv->add_option("--space", sv_space, "LSA space");
  sv->add_option("--configs", sv_configs, "Directory of config files (default: built-in presets)");
  sv->add_option("--host", sv_host, "Bind address");
  sv->add_option("--port", sv_port, "Port (PREDICTD_PORT overrides)");
  sv->add_option("--idle-timeout", sv_idle, "Session idle timeout in seconds");

  CLI11_PARSE(app, argc, argv);

  try {
    if (*tn) {
      ngo.smoothing = smoothing_from_string(smoothing);
      const auto tokens = read_tokens(tn_files);
      const auto model = train_ngram(tokens, ngo);
      export_arpa(model, tn_out);
      if (!tn_vocab_out.empty()) {
        std::ofstream vo(tn_vocab_out);
        model.vocab().save(vo);
      }
      std::cerr << "order " << model.order() << ", smoothing " << to_string(model.info().used);
      if (model.info().fell_back) std::cerr << " (fell back from " << to_string(model.info().requested) << ")";
      for (int n = 1; n <= model.order(); ++n) std::cerr << ", " << n << "-grams " << model.size(n);
      std::cerr << '\n';
    } else if (*tl) {
      const WordSet stop = tl_stop.empty() ? WordSet{} : load_stopwords(tl_stop);
      const auto space = train_space(read_tokens(tl_files), stop, lso);
      space.save(tl_out);
      std::cerr << space.size() << " words, " << space.dims() << " dimensions\n";
    } else if (*ev) {
      auto lm = std::make_shared<const NGramModel>(import_arpa(ev_lm));
      const Pipeline pipeline(lm, load_space(ev_space), resolve_config(ev_config));
      nlohmann::json all = nlohmann::json::array();
      for (const auto& f : ev_files) {
        const auto r = evaluate(pipeline, read_file(f), fs::path(f).filename().string(), ev_list, ev_trace);
        std::printf("%-10s %-24s ksr%zu %6.2f  kp %llu  ka %llu  perplexity %.2f  oov %zu/%zu\n", r.config.c_str(),
                    r.file.c_str(), r.ksr.list_size, r.ksr.ksr, static_cast<unsigned long long>(r.ksr.kp),
                    static_cast<unsigned long long>(r.ksr.ka), r.ppl.perplexity, r.ppl.oov, r.ppl.tokens);
        all.push_back(r.to_json(ev_trace));
      }
      if (!ev_report.empty()) write_json(all.size() == 1 ? all[0] : all, ev_report);
    } else if (*ea) {
      auto lm = std::make_shared<const NGramModel>(import_arpa(ea_lm));
      std::vector<std::pair<std::string, std::string>> texts;
      for (const auto& f : ea_files) texts.emplace_back(fs::path(f).filename().string(), read_file(f));
      const auto cmp = compare_configs(lm, load_space(ea_space), configs_from(ea_configs, ea_names), texts, ea_list);
      const auto table = format_table(cmp);
      std::cout << table;
      if (!ea_report.empty()) write_json(cmp.to_json(), ea_report);
      if (!ea_table.empty()) std::ofstream(ea_table) << table;
    } else if (*pr) {
      auto lm = std::make_shared<const NGramModel>(import_arpa(pr_lm));
      const Pipeline pipeline(lm, load_space(pr_space), resolve_config(pr_config));
      auto state = pipeline.new_state();
      for (const auto& t : tokenize(pr_context)) pipeline.commit(state, t);
      for (const auto& p : pipeline.predict(state, pr_prefix, pr_n)) {
        std::printf("%-20s %.4f\n", p.word.c_str(), p.probability);
      }
    } else if (*ps) {
      fs::create_directories(ps_out);
      for (const auto& n : CombinerConfig::preset_names()) {
        save_config(CombinerConfig::preset(n), (fs::path(ps_out) / (n + ".json")).string());
      }
    } else if (*sv) {
      if (!sv_server_config.empty()) {
        std::ifstream in(sv_server_config);
        const auto j = nlohmann::json::parse(in);
        const auto base = fs::path(sv_server_config).parent_path();
        const auto rel = [&](const std::string& p) { return fs::path(p).is_absolute() ? p : (base / p).string(); };
        if (sv_lm.empty() && j.contains("lm")) sv_lm = rel(j["lm"]);
        if (sv_space.empty() && j.contains("space")) sv_space = rel(j["space"]);
        if (sv_configs.empty() && j.contains("configs")) sv_configs = rel(j["configs"]);
        sv_port = j.value("port", sv_port);
        sv_host = j.value("host", sv_host);
        sv_idle = j.value("idle_timeout", sv_idle);
      }
      if (sv_lm.empty()) throw Error("serve needs --lm or a server config naming one");
      if (const char* env = std::getenv("PREDICTD_PORT")) sv_port = std::stoi(env);
      auto lm = std::make_shared<const NGramModel>(import_arpa(sv_lm));
      std::map<std::string, CombinerConfig> configs;
      if (sv_configs.empty()) {
        for (const auto& n : CombinerConfig::preset_names()) configs[n] = CombinerConfig::preset(n);
      } else {
        configs = load_config_dir(sv_configs);
      }
      PredictionService service(lm, load_space(sv_space), configs, {std::chrono::seconds(sv_idle)});
      httplib::Server server;
      mount(server, service);
      std::atomic<bool> running{true};
      std::mutex m;
      std::condition_variable cv;
      std::thread janitor([&] {
        std::unique_lock lock(m);
        while (running) {
          cv.wait_for(lock, std::chrono::seconds(60));
          service.evict_idle();
        }
      });
      std::cerr << "listening on " << sv_host << ':' << sv_port << '\n';
      const bool ok = server.listen(sv_host, sv_port);
      running = false;
      cv.notify_all();
      janitor.join();
      if (!ok) throw Error("cannot listen on " + sv_host + ":" + std::to_string(sv_port));
    }
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << '\n';
    return 1;
  }
  return 0;
}
