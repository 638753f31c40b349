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


#include "docfoundry/pipelines.hpp"

#include <algorithm>
#include <cctype>

#include "docfoundry/analyzer.hpp"
#include "docfoundry/csv.hpp"
#include "docfoundry/vector_ops.hpp"

namespace docfoundry {

namespace {

bool is_blank(std::string_view s) {
  return std::all_of(s.begin(), s.end(), [](unsigned char c) { return std::isspace(c) != 0; });
}

std::size_t word_count(std::string_view s) { return word_spans(s).size(); }

std::string focus_clause(const SummarizeOptions& o) {
  return o.focus ? " Focus only on content about: " + *o.focus + "." : std::string();
}

std::string join(const std::vector<std::string>& parts, std::string_view sep) {
  std::string out;
  for (std::size_t i = 0; i < parts.size(); ++i) {
    if (i) out += sep;
    out += parts[i];
  }
  return out;
}

BackendError with_context(const BackendError& e, const std::string& context) {
  return BackendError(e.code(), context + ": " + e.what(), e.http_status());
}

nlohmann::json refs_json(const std::vector<ChunkRef>& refs) {
  nlohmann::json arr = nlohmann::json::array();
  for (const auto& r : refs) arr.push_back(r.str());
  return arr;
}

}  // namespace

nlohmann::json to_json(const SummaryResult& r) {
  return {{"summary", r.summary},
          {"direct_call_count", r.direct_call_count},
          {"map_call_count", r.map_call_count},
          {"reduce_call_count", r.reduce_call_count},
          {"chunk_refs", refs_json(r.chunk_refs)},
          {"skipped_chunks", refs_json(r.skipped_chunks)},
          {"no_relevant_content", r.no_relevant_content},
          {"concept", r.concept_text ? nlohmann::json(*r.concept_text) : nlohmann::json(nullptr)}};
}

SummaryResult summarize_map_reduce(Backend& backend, std::span<const Chunk> chunks, const SummarizeOptions& options) {
  if (options.word_budget == 0) throw InvalidArgumentError("word_budget must be positive");
  SummaryResult result;
  result.concept_text = options.focus;
  std::vector<const Chunk*> live;
  for (const auto& c : chunks) {
    if (is_blank(c.text)) result.skipped_chunks.push_back(c.ref());
    else live.push_back(&c);
  }
  if (live.empty()) throw InvalidArgumentError("nothing to summarize: every chunk is blank");
  const std::string budget = std::to_string(options.word_budget);
  const std::string focus = focus_clause(options);

  if (live.size() == 1) {
    const std::string prompt = "Summarize the following document in at most " + budget + " words." + focus +
                               "\n\nDocument:\n" + live.front()->text;
    try {
      result.summary = backend.complete(prompt).text;
    } catch (const BackendError& e) {
      throw with_context(e, "summarizing chunk " + live.front()->ref().str());
    }
    result.direct_call_count = 1;
    result.chunk_refs.push_back(live.front()->ref());
    return result;
  }

  std::vector<std::string> parts;
  for (std::size_t i = 0; i < live.size(); ++i) {
    const std::string prompt = "Summarize part " + std::to_string(i + 1) + " of " + std::to_string(live.size()) +
                               " of a document in at most " + budget + " words." + focus + "\n\nPart:\n" +
                               live[i]->text;
    try {
      parts.push_back(backend.complete(prompt).text);
    } catch (const BackendError& e) {
      throw with_context(e, "map step for chunk " + live[i]->ref().str());
    }
    ++result.map_call_count;
    result.chunk_refs.push_back(live[i]->ref());
  }

  auto reduce = [&](const std::vector<std::string>& group) {
    const std::string prompt = "Combine the following partial summaries into a single summary of at most " + budget +
                               " words." + focus + "\n\nPartial summaries:\n" + join(group, "\n\n");
    try {
      auto text = backend.complete(prompt).text;
      ++result.reduce_call_count;
      return text;
    } catch (const BackendError& e) {
      throw with_context(e, "reduce step");
    }
  };

  while (parts.size() > 1 && word_count(join(parts, "\n\n")) > options.window_words) {
    std::vector<std::vector<std::string>> groups;
    std::size_t words = 0;
    for (auto& p : parts) {
      const std::size_t w = word_count(p);
      if (groups.empty() || words + w > options.window_words) {
        groups.emplace_back();
        words = 0;
      }
      groups.back().push_back(std::move(p));
      words += w;
    }
    if (groups.size() == parts.size()) {
      parts.clear();
      for (auto& g : groups) parts.push_back(std::move(g.front()));
      break;
    }
    std::vector<std::string> next;
    for (auto& g : groups) next.push_back(g.size() == 1 ? std::move(g.front()) : reduce(g));
    parts = std::move(next);
  }
  result.summary = reduce(parts);
  return result;
}

std::vector<Chunk> select_concept_chunks(const Embedder& embedder, std::span<const Chunk> chunks,
                                         std::string_view concept_text, double min_similarity) {
  if (is_blank(concept_text)) throw InvalidArgumentError("concept is empty");
  const Embedding c = embedder.embed(concept_text);
  std::vector<std::string> texts;
  for (const auto& ch : chunks) texts.push_back(ch.text);
  const auto vectors = embedder.embed_batch(texts);
  std::vector<Chunk> selected;
  for (std::size_t i = 0; i < chunks.size(); ++i) {
    if (static_cast<double>(cosine_similarity(c, vectors[i])) >= min_similarity) selected.push_back(chunks[i]);
  }
  return selected;
}

SummaryResult summarize_concept(Backend& backend, const Embedder& embedder, std::span<const Chunk> chunks,
                                std::string_view concept_text, double min_similarity, SummarizeOptions options) {
  const auto selected = select_concept_chunks(embedder, chunks, concept_text, min_similarity);
  if (selected.empty()) {
    SummaryResult r;
    r.no_relevant_content = true;
    r.concept_text = std::string(concept_text);
    r.summary = "No content relevant to \"" + std::string(concept_text) + "\" was found.";
    return r;
  }
  auto r = summarize_map_reduce(backend, selected, options);
  r.concept_text = std::string(concept_text);
  return r;
}

nlohmann::json to_json(const ExtractionRow& row) {
  return {{"doc_id", row.doc_id},
          {"unit_index", row.unit_index},
          {"unit_text", row.unit_text},
          {"record", row.record ? *row.record : nlohmann::json(nullptr)},
          {"attempts_used", row.attempts_used},
          {"error", row.error ? nlohmann::json(*row.error) : nlohmann::json(nullptr)},
          {"report", row.report ? to_json(*row.report) : nlohmann::json(nullptr)}};
}

std::vector<ExtractionRow> extract_over_units(Backend& backend, const DocumentRecord& doc, UnitKind unit,
                                              std::string_view prompt_template, const RecordSchema& schema,
                                              bool attempt_fix, std::size_t max_attempts,
                                              const ChunkingConfig& passage_cfg) {
  const auto names = template_placeholders(prompt_template);
  if (std::find(names.begin(), names.end(), "unit_text") == names.end()) {
    throw InvalidArgumentError("prompt template must contain {unit_text}");
  }
  if (auto report = check_schema(schema); !report.ok) throw SchemaError(report);
  std::vector<ExtractionRow> rows;
  const auto spans = segment_units(doc.text, unit, passage_cfg);
  for (std::size_t i = 0; i < spans.size(); ++i) {
    ExtractionRow row;
    row.doc_id = doc.doc_id;
    row.unit_index = i;
    row.unit_text = doc.text.substr(spans[i].start, spans[i].end - spans[i].start);
    const std::string input = render_template(
        prompt_template, {{"unit_text", row.unit_text}, {"doc_id", doc.doc_id}, {"source_path", doc.source_path}});
    try {
      auto res = extract_structured(backend, input, schema, attempt_fix, max_attempts);
      row.record = std::move(res.record);
      row.attempts_used = res.attempts_used;
    } catch (const ExhaustedAttemptsError& e) {
      row.attempts_used = e.attempts_used();
      std::string msg = e.what();
      for (const auto& issue : e.report().errors) msg += "; " + issue.path + ": " + issue.message;
      row.error = std::move(msg);
      row.report = e.report();
    } catch (const BackendError& e) {
      if (e.is_transport()) throw;
      row.attempts_used = 1;
      row.error = e.code() + ": " + e.what();
    }
    rows.push_back(std::move(row));
  }
  return rows;
}

std::string export_rows_csv(std::span<const ExtractionRow> rows, const RecordSchema& schema) {
  csv::Row header{"doc_id", "unit_index", "unit_text"};
  for (const auto& f : schema.fields) header.push_back(f.name);
  header.push_back("attempts_used");
  header.push_back("error");
  std::string out = csv::format_row(header);
  for (const auto& row : rows) {
    csv::Row cells{row.doc_id, std::to_string(row.unit_index), row.unit_text};
    for (const auto& f : schema.fields) {
      if (!row.record || !row.record->contains(f.name) || (*row.record)[f.name].is_null()) {
        cells.emplace_back();
        continue;
      }
      const auto& v = (*row.record)[f.name];
      cells.push_back(v.is_string() ? v.get<std::string>() : v.dump());
    }
    cells.push_back(std::to_string(row.attempts_used));
    cells.push_back(row.error.value_or(""));
    out += csv::format_row(cells);
  }
  return out;
}

FewShotModel fewshot_train(const Embedder& embedder, std::span<const LabeledText> examples) {
  if (examples.empty()) throw InvalidArgumentError("few-shot training needs examples");
  std::map<std::string, Eigen::VectorXd> sums;
  FewShotModel model;
  model.embedder_id = embedder.id();
  for (const auto& ex : examples) {
    if (ex.label.empty()) throw InvalidArgumentError("example with empty label");
    const Eigen::VectorXd v = embedder.embed(ex.text).cast<double>();
    auto [it, fresh] = sums.try_emplace(ex.label, Eigen::VectorXd::Zero(static_cast<Eigen::Index>(embedder.dim())));
    it->second += v;
    ++model.example_counts[ex.label];
  }
  if (sums.size() < 2) throw InvalidArgumentError("few-shot training needs at least two labels");
  for (auto& [label, sum] : sums) {
    model.centroids[label] = l2_normalized(sum / static_cast<double>(model.example_counts[label]));
  }
  return model;
}

Prediction fewshot_predict(const FewShotModel& model, const Embedder& embedder, std::string_view text) {
  if (model.centroids.empty()) throw InvalidArgumentError("few-shot model has no labels");
  const Eigen::VectorXd q = embedder.embed(text).cast<double>();
  Prediction best;
  bool first = true;
  for (const auto& [label, centroid] : model.centroids) {  // map order = lexicographic
    const double s = cosine_similarity(q, centroid);
    if (first || s > best.score) {
      best = {label, s};
      first = false;
    }
  }
  return best;
}

std::vector<LabeledText> read_examples_csv(std::string_view csv_text) {
  const auto rows = csv::parse(csv_text);
  if (rows.empty() || rows.front().size() < 2 || rows.front()[0] != "text" || rows.front()[1] != "label") {
    throw InvalidArgumentError("examples CSV must start with the header text,label");
  }
  std::vector<LabeledText> out;
  for (std::size_t i = 1; i < rows.size(); ++i) {
    if (rows[i].size() == 1 && rows[i][0].empty()) continue;
    if (rows[i].size() != 2) throw InvalidArgumentError("examples CSV row " + std::to_string(i + 1) + " needs 2 cells");
    out.push_back({rows[i][0], rows[i][1]});
  }
  return out;
}

nlohmann::json to_json(const AnswerWithSources& a) {
  nlohmann::json sources = nlohmann::json::array();
  for (const auto& s : a.sources) sources.push_back({{"chunk_ref", s.ref.str()}, {"score", s.score}, {"snippet", s.snippet}});
  return {{"question", a.question}, {"answer", a.answer}, {"mode", to_string(a.mode)}, {"sources", sources}};
}

std::string ask_prompt(std::string_view question, const std::vector<std::string>& passages) {
  std::string out =
      "Answer the question using only the numbered sources below and cite them as [n]. "
      "If the sources do not contain the answer, say that the sources are insufficient.\n\nSources:\n";
  if (passages.empty()) out += "(none)\n";
  for (std::size_t i = 0; i < passages.size(); ++i) out += "[" + std::to_string(i + 1) + "] " + passages[i] + "\n";
  out += "\nQuestion: ";
  out += question;
  out += "\nAnswer:";
  return out;
}

namespace {

std::string snippet_of(const std::string& text, std::size_t limit) {
  if (text.size() <= limit) return text;
  std::size_t cut = limit;
  while (cut > 0 && !std::isspace(static_cast<unsigned char>(text[cut]))) --cut;
  if (cut == 0) cut = limit;
  // Never split a UTF-8 sequence.
  while (cut > 0 && (static_cast<unsigned char>(text[cut]) & 0xC0) == 0x80) --cut;
  std::size_t end = cut;
  while (end > 0 && std::isspace(static_cast<unsigned char>(text[end - 1]))) --end;
  return text.substr(0, end);
}

}  // namespace

AnswerWithSources ask(Backend& backend, const DualStore& store, std::string_view question, std::size_t k,
                      SearchMode mode, std::size_t snippet_chars) {
  if (is_blank(question)) throw InvalidArgumentError("question is empty");
  if (k == 0) throw InvalidArgumentError("k must be positive");
  if (store.empty()) throw EmptyStoreError("the store holds no documents");
  AnswerWithSources out;
  out.question = std::string(question);
  out.mode = mode;
  const auto page = store.search_free_text(question, k, mode);
  std::vector<std::string> passages;
  for (const auto& hit : page.hits) {
    const auto chunk = store.chunk(hit.ref);
    if (!chunk) continue;
    passages.push_back(chunk->text);
    out.sources.push_back({hit.ref, hit.fused_score, snippet_of(chunk->text, snippet_chars)});
  }
  out.answer = backend.complete(ask_prompt(question, passages)).text;
  return out;
}

nlohmann::json to_json(const GroundingReport& g) {
  nlohmann::json sentences = nlohmann::json::array();
  for (const auto& s : g.sentences) {
    sentences.push_back({{"sentence", s.sentence},
                         {"start", s.span.start},
                         {"end", s.span.end},
                         {"overlap", s.overlap},
                         {"supported", s.supported},
                         {"best_source", s.best_source ? nlohmann::json(s.best_source->str()) : nlohmann::json(nullptr)}});
  }
  return {{"threshold", g.threshold},
          {"snippets_verbatim", g.snippets_verbatim},
          {"non_verbatim_snippets", refs_json(g.non_verbatim_snippets)},
          {"sentences", sentences},
          {"unsupported", g.unsupported},
          {"all_supported", g.all_supported()}};
}

std::set<std::string> content_words(std::string_view text) {
  std::set<std::string> words;
  const auto& stop = english_stopwords();
  for (auto& t : analyze_terms(text, AnalyzerConfig{})) {
    if (!stop.contains(t)) words.insert(std::move(t));
  }
  return words;
}

double content_overlap(const std::set<std::string>& sentence, const std::set<std::string>& chunk) {
  if (sentence.empty()) return 1.0;
  std::size_t shared = 0;
  for (const auto& w : sentence) shared += chunk.contains(w) ? 1 : 0;
  return static_cast<double>(shared) / static_cast<double>(sentence.size());
}

namespace {

// Removes citation markers such as "[3]" or "[1, 2]".
std::string strip_citations(std::string_view s) {
  std::string out;
  for (std::size_t i = 0; i < s.size(); ++i) {
    if (s[i] == '[') {
      std::size_t j = i + 1;
      bool digits = false;
      while (j < s.size() && (std::isdigit(static_cast<unsigned char>(s[j])) || s[j] == ',' || s[j] == ' ')) {
        digits = digits || std::isdigit(static_cast<unsigned char>(s[j]));
        ++j;
      }
      if (digits && j < s.size() && s[j] == ']') {
        i = j;
        continue;
      }
    }
    out += s[i];
  }
  return out;
}

}  // namespace

GroundingReport verify_grounding(const AnswerWithSources& answer, const DualStore& store, double threshold) {
  GroundingReport report;
  report.threshold = threshold;
  std::vector<std::pair<ChunkRef, std::set<std::string>>> sources;
  for (const auto& s : answer.sources) {
    const auto chunk = store.chunk(s.ref);
    if (!chunk) throw NotFoundError("cited chunk not in store: " + s.ref.str());
    if (chunk->text.find(s.snippet) == std::string::npos) {
      report.snippets_verbatim = false;
      report.non_verbatim_snippets.push_back(s.ref);
    }
    sources.emplace_back(s.ref, content_words(chunk->text));
  }
  for (const auto& span : segment_units(answer.answer, UnitKind::sentence)) {
    SentenceVerdict v;
    v.span = span;
    v.sentence = answer.answer.substr(span.start, span.end - span.start);
    const auto words = content_words(strip_citations(v.sentence));
    if (words.empty()) {
      v.overlap = 1.0;
    } else {
      for (const auto& [ref, cw] : sources) {
        const double o = content_overlap(words, cw);
        if (!v.best_source || o > v.overlap) {
          v.overlap = o;
          v.best_source = ref;
        }
      }
    }
    v.supported = v.overlap >= threshold;
    if (!v.supported) report.unsupported.push_back(v.sentence);
    report.sentences.push_back(std::move(v));
  }
  return report;
}

nlohmann::json to_json(const ChatSession& s) {
  nlohmann::json history = nlohmann::json::array();
  for (const auto& m : s.history) history.push_back(to_json(m));
  return {{"session_id", s.session_id},
          {"created_at", s.created_at},
          {"system_prompt", s.system_prompt ? nlohmann::json(*s.system_prompt) : nlohmann::json(nullptr)},
          {"history", history}};
}

std::vector<ChatMessage> fit_context(std::span<const ChatMessage> messages, std::size_t budget_chars) {
  if (messages.empty()) return {};
  std::size_t first = messages.size() - 1;
  std::size_t used = messages.back().content.size();
  while (first > 0 && used + messages[first - 1].content.size() <= budget_chars) {
    used += messages[first - 1].content.size();
    --first;
  }
  while (first + 1 < messages.size() && messages[first].role != ChatMessage::Role::user) ++first;
  return {messages.begin() + static_cast<std::ptrdiff_t>(first), messages.end()};
}

ChatTurn chat_turn(Backend& backend, ChatSession& session, std::string_view user_message,
                   std::size_t context_budget_chars) {
  if (is_blank(user_message)) throw InvalidArgumentError("message is empty");
  std::vector<ChatMessage> all = session.history;
  all.push_back({ChatMessage::Role::user, std::string(user_message)});
  ChatTurn turn;
  if (session.system_prompt) turn.transmitted.push_back({ChatMessage::Role::system, *session.system_prompt});
  for (auto& m : fit_context(all, context_budget_chars)) turn.transmitted.push_back(std::move(m));
  turn.reply = backend.chat(turn.transmitted).text;
  session.history.push_back(std::move(all.back()));
  session.history.push_back({ChatMessage::Role::assistant, turn.reply});
  return turn;
}

}  // namespace docfoundry
