#include "navstack/lexicon.hpp"

#include <cctype>
#include <sstream>

#include "navstack/common.hpp"

namespace navstack {

namespace {

struct ClassRow {
  const char* name;
  SizeCategory size;
  std::vector<const char*> synonyms;
};

using S = SizeCategory;

// COCO-style detector vocabulary. Synonyms avoid the grammar words
// (to, the, a, at, then, and, ...) so clause parsing stays unambiguous.
const std::vector<ClassRow>& class_rows() {
  static const std::vector<ClassRow> rows = {
      {"person", S::kMedium, {"human", "man", "woman", "pedestrian"}},
      {"bicycle", S::kMedium, {"bike", "cycle", "pushbike"}},
      {"car", S::kLarge, {"automobile", "sedan", "hatchback"}},
      {"motorcycle", S::kLarge, {"motorbike", "scooter", "moped"}},
      {"airplane", S::kLarge, {"plane", "aircraft", "jet"}},
      {"bus", S::kLarge, {"coach", "minibus", "shuttle bus"}},
      {"train", S::kLarge, {"locomotive", "railcar", "tram"}},
      {"truck", S::kLarge, {"lorry", "pickup", "pickup truck"}},
      {"boat", S::kLarge, {"ship", "vessel", "canoe"}},
      {"traffic light", S::kMedium, {"stoplight", "traffic signal", "signal light"}},
      {"fire hydrant", S::kSmall, {"hydrant", "fireplug", "water hydrant"}},
      {"stop sign", S::kMedium, {"halt sign", "octagon sign", "stop board"}},
      {"parking meter", S::kMedium, {"meter", "parking machine", "pay station"}},
      {"bench", S::kMedium, {"park bench", "pew", "bleacher"}},
      {"bird", S::kSmall, {"pigeon", "sparrow", "songbird"}},
      {"cat", S::kSmall, {"kitten", "kitty", "feline"}},
      {"dog", S::kSmall, {"puppy", "hound", "canine"}},
      {"horse", S::kLarge, {"pony", "stallion", "mare"}},
      {"sheep", S::kMedium, {"lamb", "ewe", "ram"}},
      {"cow", S::kLarge, {"cattle", "calf", "bull"}},
      {"elephant", S::kLarge, {"pachyderm", "tusker", "jumbo"}},
      {"bear", S::kLarge, {"grizzly", "polar bear", "brown bear"}},
      {"zebra", S::kLarge, {"striped horse", "plains zebra", "quagga"}},
      {"giraffe", S::kLarge, {"camelopard", "tall animal", "spotted giraffe"}},
      {"backpack", S::kSmall, {"rucksack", "knapsack", "bag", "daypack"}},
      {"umbrella", S::kSmall, {"parasol", "brolly", "sunshade"}},
      {"handbag", S::kSmall, {"purse", "clutch", "pocketbook"}},
      {"tie", S::kSmall, {"necktie", "bow tie", "cravat"}},
      {"suitcase", S::kSmall, {"luggage", "baggage", "trolley case"}},
      {"frisbee", S::kSmall, {"flying disc", "disc", "throwing disc"}},
      {"skis", S::kSmall, {"ski", "ski pair", "snow skis"}},
      {"snowboard", S::kSmall, {"snow board", "shred board", "ride board"}},
      {"sports ball", S::kSmall, {"ball", "football", "soccer ball", "basketball"}},
      {"kite", S::kSmall, {"sky kite", "paper kite", "flying kite"}},
      {"baseball bat", S::kSmall, {"bat", "slugger", "wooden bat"}},
      {"baseball glove", S::kSmall, {"mitt", "glove", "catcher mitt"}},
      {"skateboard", S::kSmall, {"skate deck", "longboard", "skate board"}},
      {"surfboard", S::kMedium, {"surf board", "wave board", "paddleboard"}},
      {"tennis racket", S::kSmall, {"racket", "racquet", "tennis racquet"}},
      {"bottle", S::kSmall, {"flask", "water bottle", "canteen"}},
      {"wine glass", S::kSmall, {"goblet", "stemware", "glass"}},
      {"cup", S::kSmall, {"mug", "teacup", "beaker"}},
      {"fork", S::kSmall, {"dinner fork", "table fork", "salad fork"}},
      {"knife", S::kSmall, {"blade", "kitchen knife", "cutter"}},
      {"spoon", S::kSmall, {"teaspoon", "tablespoon", "ladle"}},
      {"bowl", S::kSmall, {"dish", "soup bowl", "serving bowl"}},
      {"banana", S::kSmall, {"plantain", "banana bunch", "yellow fruit"}},
      {"apple", S::kSmall, {"red apple", "green apple", "crabapple"}},
      {"sandwich", S::kSmall, {"sub", "hoagie", "panini"}},
      {"orange", S::kSmall, {"tangerine", "mandarin", "clementine"}},
      {"broccoli", S::kSmall, {"broccolini", "green floret", "calabrese"}},
      {"carrot", S::kSmall, {"baby carrot", "carrot stick", "orange root"}},
      {"hot dog", S::kSmall, {"hotdog", "frankfurter", "sausage"}},
      {"pizza", S::kSmall, {"pizza slice", "flatbread", "margherita"}},
      {"donut", S::kSmall, {"doughnut", "cruller", "ring cake"}},
      {"cake", S::kSmall, {"cupcake", "gateau", "sponge cake"}},
      {"chair", S::kMedium, {"seat", "stool", "armchair"}},
      {"couch", S::kMedium, {"sofa", "settee", "loveseat"}},
      {"potted plant", S::kMedium, {"plant", "houseplant", "flowerpot"}},
      {"bed", S::kLarge, {"mattress", "bunk", "cot"}},
      {"dining table", S::kMedium, {"table", "dinner table", "kitchen table"}},
      {"toilet", S::kMedium, {"lavatory", "commode", "loo"}},
      {"tv", S::kMedium, {"television", "tv set", "telly"}},
      {"laptop", S::kSmall, {"notebook", "notebook computer", "computer"}},
      {"mouse", S::kSmall, {"computer mouse", "trackball", "pointer"}},
      {"remote", S::kSmall, {"remote control", "clicker", "controller"}},
      {"keyboard", S::kSmall, {"keypad", "typing board", "computer keyboard"}},
      {"cell phone", S::kSmall, {"phone", "smartphone", "mobile phone", "cellphone"}},
      {"microwave", S::kMedium, {"microwave oven", "micro oven", "nuker"}},
      {"oven", S::kMedium, {"stove", "cooker", "range"}},
      {"toaster", S::kSmall, {"bread toaster", "toasting machine", "sandwich toaster"}},
      {"sink", S::kMedium, {"washbasin", "kitchen sink", "wash sink"}},
      {"refrigerator", S::kLarge, {"fridge", "icebox", "freezer"}},
      {"book", S::kSmall, {"novel", "textbook", "paperback"}},
      {"clock", S::kSmall, {"wall clock", "alarm clock", "timepiece"}},
      {"vase", S::kSmall, {"urn", "flower vase", "jar"}},
      {"scissors", S::kSmall, {"shears", "clippers", "snips"}},
      {"teddy bear", S::kSmall, {"teddy", "stuffed bear", "plush bear"}},
      {"hair drier", S::kSmall, {"hair dryer", "blow dryer", "blowdryer"}},
      {"toothbrush", S::kSmall, {"tooth brush", "dental brush", "electric toothbrush"}},
  };
  return rows;
}

}  // namespace

std::string_view to_string(SizeCategory c) {
  switch (c) {
    case SizeCategory::kSmall: return "small";
    case SizeCategory::kMedium: return "medium";
    case SizeCategory::kLarge: return "large";
  }
  return "medium";
}

bool SynonymTable::add(const std::string& canonical, const std::string& synonym) {
  auto it = owner_.find(synonym);
  if (it != owner_.end()) return false;
  auto& list = entries_[canonical];
  if (list.empty() && synonym != canonical) {
    // Canonical classes always map to themselves.
    if (owner_.count(canonical)) return false;
    list.push_back(canonical);
    owner_[canonical] = canonical;
  }
  list.push_back(synonym);
  owner_[synonym] = canonical;
  return true;
}

const std::vector<std::string>& SynonymTable::synonyms(const std::string& canonical) const {
  static const std::vector<std::string> empty;
  auto it = entries_.find(canonical);
  return it == entries_.end() ? empty : it->second;
}

std::optional<std::string> SynonymTable::owner(const std::string& synonym) const {
  auto it = owner_.find(synonym);
  if (it == owner_.end()) return std::nullopt;
  return it->second;
}

SynonymTable static_synonym_table() {
  SynonymTable t;
  for (const auto& row : class_rows()) {
    if (!t.add(row.name, row.name)) throw Error(std::string("duplicate class ") + row.name);
    for (const char* s : row.synonyms) {
      if (!t.add(row.name, s)) throw Error(std::string("synonym collision: ") + s);
    }
  }
  return t;
}

const ClassLexicon& ClassLexicon::standard() {
  static const ClassLexicon lex = [] {
    std::vector<std::string> classes;
    std::vector<SizeCategory> sizes;
    for (const auto& row : class_rows()) {
      classes.emplace_back(row.name);
      sizes.push_back(row.size);
    }
    return ClassLexicon(std::move(classes), std::move(sizes), static_synonym_table());
  }();
  return lex;
}

ClassLexicon::ClassLexicon(std::vector<std::string> classes, std::vector<SizeCategory> sizes,
                           SynonymTable synonyms)
    : classes_(std::move(classes)), sizes_(std::move(sizes)), synonyms_(std::move(synonyms)) {
  if (classes_.empty()) throw Error("class lexicon is empty");
  if (sizes_.size() != classes_.size()) throw Error("one size category per class required");
  for (std::size_t i = 0; i < classes_.size(); ++i) {
    if (!index_.emplace(classes_[i], i).second) throw Error("duplicate class " + classes_[i]);
    if (synonyms_.synonyms(classes_[i]).empty()) synonyms_.add(classes_[i], classes_[i]);
  }
  for (const auto& [cls, syns] : synonyms_.entries()) {
    if (!index_.count(cls)) throw Error("synonym table names unknown class " + cls);
    for (const auto& s : syns) max_phrase_words_ = std::max(max_phrase_words_, split_words(s).size());
  }
}

std::size_t ClassLexicon::index_of(const std::string& cls) const {
  auto it = index_.find(cls);
  if (it == index_.end()) throw Error("class '" + cls + "' is not in the lexicon");
  return it->second;
}

SizeCategory ClassLexicon::size_category(const std::string& cls) const {
  return sizes_[index_of(cls)];
}

std::optional<std::string> ClassLexicon::resolve(const std::string& phrase) const {
  return synonyms_.owner(join_words(split_words(phrase), 0, split_words(phrase).size()));
}

std::vector<std::string> split_words(std::string_view text) {
  std::vector<std::string> out;
  std::string cur;
  auto flush = [&] {
    while (!cur.empty() && (cur.back() == ',' || cur.back() == '.' || cur.back() == ';' ||
                            cur.back() == '!' || cur.back() == '?')) {
      // keep the decimal point inside numbers such as "0.40"
      cur.pop_back();
    }
    if (!cur.empty()) out.push_back(cur);
    cur.clear();
  };
  for (char c : text) {
    if (std::isspace(static_cast<unsigned char>(c))) {
      flush();
    } else {
      cur.push_back(static_cast<char>(std::tolower(static_cast<unsigned char>(c))));
    }
  }
  flush();
  return out;
}

std::string join_words(const std::vector<std::string>& words, std::size_t begin, std::size_t end) {
  std::string s;
  for (std::size_t i = begin; i < end && i < words.size(); ++i) {
    if (!s.empty()) s.push_back(' ');
    s += words[i];
  }
  return s;
}

}  // namespace navstack
