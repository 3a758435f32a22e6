// Adapter for the SNPPhenA distribution: one XML file per abstract, using the
// standoff layout shared with the DDI corpus (sentence text attribute, entities
// with inclusive "start-end" character offsets, pair elements carrying the
// label and annotation attributes).

#include <algorithm>
#include <cctype>
#include <exception>
#include <fstream>
#include <sstream>

#include <boost/property_tree/ptree.hpp>
#include <boost/property_tree/xml_parser.hpp>

#include "snprex/corpus.hpp"
#include "snprex/errors.hpp"

namespace snprex {

namespace {

namespace pt = boost::property_tree;

const pt::ptree kEmpty;

const pt::ptree& attributes(const pt::ptree& node) {
  const auto it = node.find("<xmlattr>");
  return it == node.not_found() ? kEmpty : it->second;
}

std::optional<std::string> attr(const pt::ptree& node, const char* name) {
  const auto& a = attributes(node);
  const auto it = a.find(name);
  if (it == a.not_found()) return std::nullopt;
  return it->second.data();
}

std::string lower(std::string s) {
  std::transform(s.begin(), s.end(), s.begin(), [](unsigned char c) { return static_cast<char>(std::tolower(c)); });
  return s;
}

struct Context {
  const std::string& source;
  [[noreturn]] void fail(const std::string& element, const std::string& reason) const {
    throw MalformedRecord(source + ": <" + element + ">: " + reason);
  }
  std::string require(const pt::ptree& node, const char* element, const char* name) const {
    auto v = attr(node, name);
    if (!v) fail(element, std::string("missing attribute '") + name + "'");
    return *v;
  }
};

// "12-17" (inclusive end) -> [12, 18)
std::pair<std::size_t, std::size_t> parse_offset(const std::string& raw, const Context& ctx, const std::string& id) {
  if (raw.find(';') != std::string::npos || raw.find(',') != std::string::npos) {
    ctx.fail("entity", "mention '" + id + "' has a discontinuous offset '" + raw + "'");
  }
  const auto dash = raw.find('-');
  if (dash == std::string::npos) ctx.fail("entity", "mention '" + id + "' offset '" + raw + "' is not 'start-end'");
  try {
    std::size_t used = 0;
    const unsigned long start = std::stoul(raw.substr(0, dash), &used);
    if (used != dash) throw std::invalid_argument("start");
    const std::string tail = raw.substr(dash + 1);
    const unsigned long end = std::stoul(tail, &used);
    if (used != tail.size()) throw std::invalid_argument("end");
    return {start, end + 1};
  } catch (const std::logic_error&) {
    ctx.fail("entity", "mention '" + id + "' offset '" + raw + "' is not numeric");
  }
}

Sentence read_sentence(const pt::ptree& node, const Context& ctx) {
  Sentence sent;
  sent.id = ctx.require(node, "sentence", "id");
  sent.text = ctx.require(node, "sentence", "text");

  for (const auto& [name, child] : node) {
    if (name != "entity") continue;
    EntityMention m;
    m.id = ctx.require(child, "entity", "id");
    const std::string type = ctx.require(child, "entity", "type");
    const auto kind = parse_entity_kind(type);
    if (!kind) ctx.fail("entity", "mention '" + m.id + "' has unknown type '" + type + "'");
    m.kind = *kind;
    m.surface = ctx.require(child, "entity", "text");
    std::tie(m.char_start, m.char_end) = parse_offset(ctx.require(child, "entity", "charOffset"), ctx, m.id);
    m.normalized = attr(child, "normalized");
    if (!m.normalized && m.kind == EntityKind::Snp) {
      // rs-identifiers are their own normal form.
      std::string s = lower(m.surface);
      if (s.size() > 2 && s.rfind("rs", 0) == 0 &&
          std::all_of(s.begin() + 2, s.end(), [](unsigned char c) { return std::isdigit(c); })) {
        m.normalized = s;
      }
    }
    sent.mentions.push_back(std::move(m));
  }

  for (const auto& [name, child] : node) {
    if (name != "pair") continue;
    CandidatePair c;
    c.id = ctx.require(child, "pair", "id");
    const std::string e1 = ctx.require(child, "pair", "e1");
    const std::string e2 = ctx.require(child, "pair", "e2");
    const EntityMention* m1 = sent.find_mention(e1);
    const EntityMention* m2 = sent.find_mention(e2);
    if (m1 == nullptr || m2 == nullptr) ctx.fail("pair", "pair '" + c.id + "' references an unknown entity");
    if (m1->kind == m2->kind) ctx.fail("pair", "pair '" + c.id + "' does not join an SNP with a phenotype");
    c.snp_ref = m1->kind == EntityKind::Snp ? e1 : e2;
    c.pheno_ref = m1->kind == EntityKind::Snp ? e2 : e1;
    c.sentence_ref = sent.id;

    const char* label_attr = attr(child, "type") ? "type" : "label";
    c.label = parse_label(ctx.require(child, "pair", label_attr));
    for (const auto& [key, value] : attributes(child)) {
      if (key == "id" || key == "e1" || key == "e2" || key == label_attr) continue;
      c.extras.emplace(key, value.data());
    }
    sent.candidates.push_back(std::move(c));
  }
  return sent;
}

Document read_document_node(const pt::ptree& node, const Context& ctx, std::optional<SplitHint> split) {
  Document doc;
  doc.id = ctx.require(node, "document", "id");
  doc.title = attr(node, "title");
  doc.split_hint = split;
  for (const auto& [name, child] : node) {
    if (name == "sentence") doc.sentences.push_back(read_sentence(child, ctx));
  }
  return doc;
}

std::optional<SplitHint> split_from_path(const std::filesystem::path& root, const std::filesystem::path& file) {
  const auto rel = std::filesystem::relative(file.parent_path(), root);
  for (const auto& part : rel) {
    const std::string p = lower(part.string());
    if (p.find("train") != std::string::npos) return SplitHint::Train;
    if (p.find("test") != std::string::npos) return SplitHint::Test;
  }
  return SplitHint::None;
}

std::vector<Document> read_file(const std::filesystem::path& root, const std::filesystem::path& file) {
  std::ifstream in(file, std::ios::binary);
  if (!in) throw MissingPath("cannot open " + file.string());
  std::ostringstream buf;
  buf << in.rdbuf();
  const std::string source = file.string();
  const std::string xml = buf.str();

  const Context ctx{source};
  pt::ptree tree;
  try {
    std::istringstream is(xml);
    pt::read_xml(is, tree);
  } catch (const pt::xml_parser_error& e) {
    throw MalformedRecord(source + ":" + std::to_string(e.line()) + ": " + e.message());
  }
  const auto split = split_from_path(root, file);
  std::vector<Document> docs;
  for (const auto& [name, node] : tree) {
    if (name == "document") {
      docs.push_back(read_document_node(node, ctx, split));
    } else if (name != "<xmlcomment>") {
      for (const auto& [inner, child] : node) {
        if (inner == "document") docs.push_back(read_document_node(child, ctx, split));
      }
    }
  }
  if (docs.empty()) throw MalformedRecord(source + ": no <document> element");
  return docs;
}

}  // namespace

Document read_snpphena_document(std::string_view xml, const std::string& source_name, std::optional<SplitHint> split) {
  const Context ctx{source_name};
  pt::ptree tree;
  try {
    std::istringstream is{std::string(xml)};
    pt::read_xml(is, tree);
  } catch (const pt::xml_parser_error& e) {
    throw MalformedRecord(source_name + ":" + std::to_string(e.line()) + ": " + e.message());
  }
  const auto it = tree.find("document");
  if (it == tree.not_found()) throw MalformedRecord(source_name + ": no <document> element");
  return read_document_node(it->second, ctx, split);
}

Corpus read_snpphena_native(const std::filesystem::path& root) {
  std::error_code ec;
  if (!std::filesystem::exists(root, ec)) throw MissingPath("corpus path does not exist: " + root.string());

  std::vector<std::filesystem::path> files;
  if (std::filesystem::is_regular_file(root, ec)) {
    files.push_back(root);
  } else {
    for (const auto& entry : std::filesystem::recursive_directory_iterator(root)) {
      if (entry.is_regular_file() && lower(entry.path().extension().string()) == ".xml") files.push_back(entry.path());
    }
  }
  if (files.empty()) throw MalformedRecord(root.string() + ": no .xml corpus files found");
  std::sort(files.begin(), files.end());
  const auto base = std::filesystem::is_directory(root, ec) ? root : root.parent_path();

  // Files are parsed in parallel into fixed slots; the first failure in file
  // order is rethrown so errors are deterministic too.
  std::vector<std::vector<Document>> parsed(files.size());
  std::vector<std::exception_ptr> failures(files.size());
#pragma omp parallel for schedule(dynamic)
  for (std::ptrdiff_t i = 0; i < static_cast<std::ptrdiff_t>(files.size()); ++i) {
    try {
      parsed[i] = read_file(base, files[i]);
    } catch (...) {
      failures[i] = std::current_exception();
    }
  }
  for (const auto& f : failures) {
    if (f) std::rethrow_exception(f);
  }

  Corpus corpus;
  corpus.provenance = {root.string(), std::string(to_string(CorpusFormat::SnpphenaNative)), std::string(kCorpusSchema)};
  for (auto& docs : parsed) {
    for (auto& d : docs) corpus.documents.push_back(std::move(d));
  }
  std::stable_sort(corpus.documents.begin(), corpus.documents.end(),
                   [](const Document& a, const Document& b) { return a.id < b.id; });
  return corpus;
}

}  // namespace snprex
