/*
 * Copyright 2026 The DocFoundry Authors
 *
 * Licensed under the Apache License, Version 2.0 (the "License");
 * you may not use this file except in compliance with the License.
 * You may obtain a copy of the License at
 *
 * http://www.apache.org/licenses/LICENSE-2.0
 *
 * Unless required by applicable law or agreed to in writing, software
 * distributed under the License is distributed on an "AS IS" BASIS,
 * WITHOUT WARRANTIES OR CONDITIONS OF ANY KIND, either express or implied.
 * See the License for the specific language governing permissions and
 * limitations under the License.
 */


// docfoundry command-line interface. Every command is a thin call into
// docfoundry::Engine; exit codes are 0 (success), 1 (partial), 2 (fatal).

#include <csignal>
#include <fstream>
#include <iostream>
#include <sstream>

#include <CLI11.hpp>

#include "docfoundry/config.hpp"
#include "docfoundry/engine.hpp"
#include "docfoundry/pipelines.hpp"
#include "docfoundry/query.hpp"
#include "docfoundry/service.hpp"

namespace df = docfoundry;

namespace {

constexpr int kOk = 0;
constexpr int kPartial = 1;
constexpr int kFatal = 2;

struct GlobalOptions {
  std::string config_path;
  std::string backend;
  std::string script;
  std::string root;
  bool json = false;
};

std::string read_text(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw df::NotFoundError("cannot read " + path);
  std::stringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

df::EngineConfig build_config(const GlobalOptions& g) {
  auto cfg = df::load_config(g.config_path.empty() ? std::nullopt : std::optional<std::filesystem::path>(g.config_path));
  if (!g.root.empty()) cfg.stores_root = g.root;
  if (!g.backend.empty()) cfg.backend = df::with_backend(g.backend);
  if (!g.script.empty()) {
    cfg.backend_script = g.script;
    if (g.backend.empty()) cfg.backend.kind = df::BackendKind::scripted;
  }
  return cfg;
}

void print_json(const nlohmann::json& j) { std::cout << j.dump(2) << "\n"; }

// Excerpt of `text` around its first highlight, with ANSI bold highlights.
std::string render_snippet(const std::string& text, const nlohmann::json& highlights, std::size_t width = 240) {
  std::size_t from = 0;
  if (!highlights.empty()) {
    const std::size_t first = highlights[0]["start"].get<std::size_t>();
    from = first > 60 ? first - 60 : 0;
    while (from > 0 && (static_cast<unsigned char>(text[from]) & 0xC0) == 0x80) --from;
  }
  std::size_t to = std::min(text.size(), from + width);
  while (to < text.size() && (static_cast<unsigned char>(text[to]) & 0xC0) == 0x80) ++to;
  std::string out = from > 0 ? "..." : "";
  std::size_t pos = from;
  for (const auto& h : highlights) {
    const std::size_t s = h["start"].get<std::size_t>();
    const std::size_t e = h["end"].get<std::size_t>();
    if (s < from || e > to) continue;
    out += text.substr(pos, s - pos);
    out += "\x1b[1;33m" + text.substr(s, e - s) + "\x1b[0m";
    pos = e;
  }
  out += text.substr(pos, to - pos);
  if (to < text.size()) out += "...";
  for (auto& c : out) {
    if (c == '\n') c = ' ';
  }
  return out;
}

int report_error(const std::exception& e, bool json) {
  const auto err = [&] {
    try {
      throw;
    } catch (...) {
      return df::api_error_from_current_exception();
    }
  }();
  if (json) {
    print_json({{"error", df::to_json(err)}});
  } else {
    std::cerr << "error: " << e.what() << "\n";
  }
  return kFatal;
}

df::Service* g_service = nullptr;

extern "C" void on_signal(int) {
  if (g_service) g_service->stop();
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"docfoundry: document ingestion, hybrid retrieval and LLM pipelines"};
  app.require_subcommand(1);
  GlobalOptions g;
  app.add_option("--config", g.config_path, "TOML config file");
  app.add_option("--backend", g.backend, "Backend as provider/model, e.g. ollama/llama3.1");
  app.add_option("--script", g.script, "Script file for the scripted backend");
  app.add_option("--root", g.root, "Store directory (overrides stores.root)");
  app.add_flag("--json", g.json, "Machine-readable JSON output");

  auto* ingest = app.add_subcommand("ingest", "Load, chunk and index a directory");
  std::string ingest_dir, store_kind = "dual";
  std::vector<std::string> globs;
  std::size_t chunk_size = 0, overlap = 0;
  bool overlap_set = false;
  ingest->add_option("dir", ingest_dir)->required();
  ingest->add_option("--store", store_kind, "sparse, dense or dual")->capture_default_str();
  ingest->add_option("--chunk-size", chunk_size, "Words per chunk");
  ingest->add_option("--overlap", overlap, "Words shared by consecutive chunks")->each([&](const std::string&) { overlap_set = true; });
  ingest->add_option("--glob", globs, "Include pattern (repeatable)");

  auto* search = app.add_subcommand("search", "Query the store");
  std::string query, mode_name;
  std::size_t k = 5, page = 0;
  search->add_option("query", query)->required();
  search->add_option("-k", k)->capture_default_str();
  search->add_option("--page", page)->capture_default_str();
  search->add_option("--mode", mode_name, "sparse, dense or hybrid");

  auto* ask = app.add_subcommand("ask", "Answer a question from the store with cited sources");
  std::string question;
  std::size_t ask_k = 4;
  ask->add_option("question", question)->required();
  ask->add_option("-k", ask_k)->capture_default_str();
  ask->add_option("--mode", mode_name, "sparse, dense or hybrid");

  auto* prompt = app.add_subcommand("prompt", "Send a prompt to the backend");
  std::string prompt_text;
  prompt->add_option("text", prompt_text)->required();

  auto* summarize = app.add_subcommand("summarize", "Summarize an ingested document");
  std::string doc_id, concept_text;
  std::size_t budget = 0;
  summarize->add_option("doc_id", doc_id)->required();
  summarize->add_option("--concept", concept_text, "Summarize only content about this concept");
  summarize->add_option("--budget", budget, "Target summary length in words");

  auto* extract = app.add_subcommand("extract", "Apply a schema-bound prompt to each unit of a document");
  std::string schema_path, template_path, csv_path, unit_name = "sentence";
  bool attempt_fix = false;
  extract->add_option("doc_id", doc_id)->required();
  extract->add_option("--schema", schema_path)->required();
  extract->add_option("--template", template_path)->required();
  extract->add_option("--csv", csv_path, "Write rows as CSV");
  extract->add_option("--unit", unit_name, "sentence, paragraph or passage")->capture_default_str();
  extract->add_flag("--attempt-fix", attempt_fix, "Re-prompt with validation errors");

  auto* classify = app.add_subcommand("classify", "Few-shot classification by nearest centroid");
  std::string examples_path, input_path;
  classify->add_option("--examples", examples_path, "CSV with header text,label")->required();
  classify->add_option("--input", input_path, "Text file to classify")->required();

  auto* serve = app.add_subcommand("serve", "Run the HTTP service");
  int port = 0;
  std::string host = "127.0.0.1";
  serve->add_option("--port", port, "Port (overrides service.port)");
  serve->add_option("--host", host)->capture_default_str();

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int code = app.exit(e);
    return code == 0 ? kOk : kFatal;
  }

  std::optional<df::SearchMode> mode;
  try {
    if (!mode_name.empty()) mode = df::parse_search_mode(mode_name);
    auto cfg = build_config(g);

    if (*classify) {
      const auto examples = df::read_examples_csv(read_text(examples_path));
      const auto embedder = df::make_embedder(cfg.embedder_id);
      const auto model = df::fewshot_train(*embedder, examples);
      const auto p = df::fewshot_predict(model, *embedder, read_text(input_path));
      if (g.json) print_json({{"label", p.label}, {"score", p.score}});
      else std::cout << p.label << "\t" << p.score << "\n";
      return kOk;
    }

    if (*ingest) {
      if (chunk_size) cfg.chunking.chunk_size_words = chunk_size;
      if (overlap_set) cfg.chunking.overlap_words = overlap;
      cfg.chunking.validate();
      df::Engine engine(cfg);
      df::IngestReport r;
      try {
        r = engine.ingest(ingest_dir, globs, df::parse_store_kind(store_kind));
      } catch (const df::DuplicateError& e) {
        if (g.json) print_json({{"documents", 0}, {"chunks", 0}, {"warning", e.what()}});
        else std::cerr << "warning: " << e.what() << "\n";
        return kPartial;
      }
      if (g.json) {
        print_json(df::to_json(r));
      } else {
        std::cout << r.documents << " documents, " << r.chunks << " chunks\n";
        for (const auto& i : r.issues) std::cerr << "skipped " << i.source_path << ": " << i.reason << "\n";
        for (const auto& d : r.duplicates) std::cerr << "warning: already ingested " << d << "\n";
      }
      return r.partial() ? kPartial : kOk;
    }

    if (*serve) {
      if (port) cfg.port = port;
      df::Engine engine(cfg);
      df::Service service(engine);
      if (!service.bind(host, cfg.port)) {
        std::cerr << "error: cannot bind " << host << ":" << cfg.port << " (port in use?)\n";
        return kFatal;
      }
      g_service = &service;
      std::signal(SIGINT, on_signal);
      std::signal(SIGTERM, on_signal);
      std::cerr << "docfoundry " << df::kVersion << " listening on http://" << host << ":" << cfg.port << "\n";
      service.listen();
      g_service = nullptr;
      return kOk;
    }

    df::Engine engine(cfg);

    if (*search) {
      try {
        const auto r = engine.search(query, k, mode, page);
        if (g.json) {
          print_json(r);
          return kOk;
        }
        std::cout << r["total"].get<std::size_t>() << " matches (" << r["mode"].get<std::string>() << ")\n";
        std::size_t rank = page * k;
        for (const auto& h : r["hits"]) {
          std::cout << ++rank << ". " << h["doc_path"].get<std::string>() << " [" << h["chunk_ref"].get<std::string>()
                    << "] score " << h["score"].get<double>() << "\n   "
                    << render_snippet(h["snippet"].get<std::string>(), h["highlights"]) << "\n";
        }
        return kOk;
      } catch (const df::QuerySyntaxError& e) {
        if (g.json) {
          print_json({{"error", {{"code", e.code()}, {"message", e.what()}, {"position", e.position()}}}});
        } else {
          std::cerr << "error: " << e.what() << "\n  " << query << "\n  " << std::string(e.position(), ' ') << "^\n";
        }
        return kFatal;
      }
    }

    if (*ask) {
      const auto r = engine.ask(question, ask_k, mode);
      if (g.json) {
        print_json(r);
        return kOk;
      }
      std::cout << r["answer"].get<std::string>() << "\n\nSources:\n";
      std::size_t n = 0;
      for (const auto& s : r["sources"]) {
        std::cout << "[" << ++n << "] " << s["doc_path"].get<std::string>() << " (" << s["chunk_ref"].get<std::string>()
                  << ") score " << s["score"].get<double>() << "\n    " << s["snippet"].get<std::string>().substr(0, 160)
                  << "\n";
      }
      std::cout << "\nGrounding:\n";
      for (const auto& v : r["grounding"]["sentences"]) {
        std::cout << (v["supported"].get<bool>() ? "  supported   " : "  UNSUPPORTED ") << v["sentence"].get<std::string>()
                  << "\n";
      }
      return kOk;
    }

    if (*prompt) {
      const auto r = engine.prompt(prompt_text);
      if (g.json) print_json(r);
      else std::cout << r["text"].get<std::string>() << "\n";
      return kOk;
    }

    if (*summarize) {
      const auto r = engine.summarize(doc_id, concept_text.empty() ? std::nullopt : std::optional(concept_text),
                                      budget ? std::optional(budget) : std::nullopt);
      if (g.json) {
        print_json(r);
      } else {
        std::cout << r["summary"].get<std::string>() << "\n\n(" << r["direct_call_count"] << " direct, "
                  << r["map_call_count"] << " map, " << r["reduce_call_count"] << " reduce calls)\n";
      }
      return kOk;
    }

    if (*extract) {
      const auto schema = df::load_schema(schema_path);
      const auto r = engine.extract(doc_id, df::parse_unit_kind(unit_name), schema, read_text(template_path), attempt_fix);
      if (!csv_path.empty()) {
        std::ofstream out(csv_path, std::ios::binary | std::ios::trunc);
        out << engine.job_csv(r["job_id"].get<std::string>());
        if (!out) throw df::Error("io", "cannot write " + csv_path);
      }
      std::size_t failed = 0;
      for (const auto& row : r["rows"]) failed += row["record"].is_null() ? 1 : 0;
      if (g.json) {
        print_json(r);
      } else {
        for (const auto& row : r["rows"]) {
          std::cout << row["unit_index"] << "\t"
                    << (row["record"].is_null() ? "FAILED: " + row["error"].get<std::string>() : row["record"].dump())
                    << "\n";
        }
        std::cout << r["rows"].size() << " units, " << failed << " failed\n";
      }
      return failed ? kPartial : kOk;
    }
  } catch (const std::exception& e) {
    return report_error(e, g.json);
  }
  return kFatal;
}
