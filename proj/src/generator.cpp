#include "livinglab/generator.hpp"

#include <algorithm>
#include <array>
#include <cstdio>
#include <string>

#include "livinglab/error.hpp"
#include "livinglab/rng.hpp"

namespace livinglab {

namespace {

struct TopicVocabulary {
  const char* topic;
  std::vector<const char*> terms;
};

const std::vector<TopicVocabulary>& life_science_topics() {
  static const std::vector<TopicVocabulary> topics{
      {"infectious diseases", {"covid", "sars", "coronavirus", "vaccine", "antibody", "transmission", "outbreak", "pandemic", "immunity", "antiviral", "quarantine", "influenza"}},
      {"oncology", {"cancer", "tumor", "carcinoma", "chemotherapy", "metastasis", "oncogene", "radiotherapy", "biopsy", "lymphoma", "melanoma", "leukemia", "remission"}},
      {"cardiology", {"cardiac", "heart", "hypertension", "arrhythmia", "coronary", "stroke", "cholesterol", "atherosclerosis", "infarction", "statin", "valve", "ventricular"}},
      {"diabetes", {"diabetes", "insulin", "glucose", "glycemic", "pancreas", "obesity", "metformin", "hba1c", "diabetic", "retinopathy", "neuropathy", "metabolic"}},
      {"nutrition", {"nutrition", "diet", "vitamin", "protein", "dietary", "micronutrient", "fiber", "supplement", "calorie", "malnutrition", "folate", "iron"}},
      {"neurology", {"alzheimer", "dementia", "parkinson", "neuron", "cognitive", "epilepsy", "seizure", "neurodegeneration", "synapse", "migraine", "sclerosis", "cortex"}},
      {"microbiology", {"bacteria", "antibiotic", "resistance", "microbiome", "pathogen", "biofilm", "strain", "salmonella", "listeria", "probiotic", "gut", "sequencing"}},
      {"agriculture", {"wheat", "maize", "crop", "yield", "fertilizer", "irrigation", "harvest", "cultivar", "rice", "soybean", "pesticide", "agronomy"}},
      {"soil science", {"soil", "nitrogen", "carbon", "erosion", "organic", "compost", "phosphorus", "tillage", "humus", "rhizosphere", "salinity", "loam"}},
      {"environment", {"pollution", "climate", "emission", "ozone", "pesticide", "groundwater", "biodiversity", "ecosystem", "toxicity", "microplastic", "warming", "wetland"}},
      {"veterinary", {"livestock", "cattle", "poultry", "swine", "veterinary", "zoonotic", "dairy", "mastitis", "herd", "broiler", "welfare", "feed"}},
      {"genetics", {"gene", "genome", "mutation", "expression", "crispr", "transcriptome", "allele", "polymorphism", "epigenetic", "methylation", "rna", "variant"}},
      {"public health", {"epidemiology", "mortality", "prevalence", "cohort", "screening", "smoking", "alcohol", "physical", "activity", "disparities", "incidence", "surveillance"}},
      {"pharmacology", {"drug", "dose", "pharmacokinetics", "toxicity", "inhibitor", "receptor", "placebo", "trial", "adverse", "clearance", "bioavailability", "agonist"}},
      {"mental health", {"depression", "anxiety", "psychiatric", "stress", "schizophrenia", "bipolar", "suicide", "therapy", "wellbeing", "burnout", "ptsd", "antidepressant"}},
      {"food safety", {"food", "contamination", "aflatoxin", "hygiene", "spoilage", "packaging", "shelf", "preservation", "allergen", "residue", "foodborne", "fermentation"}},
  };
  return topics;
}

const std::vector<TopicVocabulary>& social_science_topics() {
  static const std::vector<TopicVocabulary> topics{
      {"migration", {"migration", "migrants", "refugees", "asylum", "integration", "diaspora", "citizenship", "remittances", "mobility", "immigrant"}},
      {"education", {"education", "school", "students", "teachers", "literacy", "curriculum", "university", "attainment", "dropout", "pisa"}},
      {"labour market", {"employment", "unemployment", "wages", "labour", "occupation", "workers", "precarious", "retirement", "skills", "jobs"}},
      {"elections", {"elections", "voting", "turnout", "parties", "electoral", "campaign", "voters", "ballot", "populism", "polls"}},
      {"inequality", {"inequality", "poverty", "income", "wealth", "deprivation", "stratification", "class", "redistribution", "gini", "mobility"}},
      {"religion", {"religion", "religiosity", "church", "secularization", "faith", "islam", "christianity", "belief", "worship", "clergy"}},
      {"health", {"health", "wellbeing", "illness", "healthcare", "disability", "lifestyle", "mortality", "insurance", "care", "obesity"}},
      {"family", {"family", "marriage", "divorce", "fertility", "parenting", "childcare", "household", "cohabitation", "partnership", "kinship"}},
      {"youth", {"youth", "adolescents", "young", "transition", "generation", "peers", "leisure", "juvenile", "socialization", "cohort"}},
      {"environmental attitudes", {"environmental", "attitudes", "climate", "sustainability", "concern", "recycling", "energy", "green", "consumption", "protest"}},
      {"social trust", {"trust", "social", "capital", "institutions", "cohesion", "networks", "civic", "participation", "volunteering", "neighbourhood"}},
      {"media", {"media", "television", "internet", "news", "journalism", "social", "communication", "audience", "digital", "misinformation"}},
      {"gender", {"gender", "women", "equality", "roles", "gap", "discrimination", "feminism", "masculinity", "care", "work"}},
      {"welfare state", {"welfare", "pension", "benefits", "policy", "social", "security", "state", "reform", "spending", "assistance"}},
      {"ageing", {"ageing", "elderly", "retirement", "longevity", "care", "pension", "demographic", "grandparents", "dementia", "loneliness"}},
      {"crime", {"crime", "victimization", "police", "delinquency", "violence", "punishment", "prison", "fear", "justice", "deviance"}},
  };
  return topics;
}

constexpr std::array<const char*, 24> kGenericTerms{
    "study",    "analysis", "effect",   "results",  "evidence",   "approach",
    "data",     "method",   "role",     "impact",   "assessment", "review",
    "model",    "factors",  "patterns", "case",     "survey",     "comparison",
    "outcomes", "trends",   "findings", "research", "measures",   "context"};

constexpr std::array<const char*, 5> kLifeLanguages{"en", "de", "es", "fr", "pt"};
constexpr std::array<const char*, 6> kCollectionMethods{
    "survey", "interview", "panel", "experiment", "observation", "content analysis"};
constexpr std::array<const char*, 4> kDataTypes{"numeric", "text", "audio-visual", "geospatial"};
constexpr std::array<const char*, 12> kSurnames{"Schmidt", "Garcia", "Nguyen", "Kowalski", "Rossi",
                                                "Okafor", "Lindqvist", "Tanaka", "Dubois",
                                                "Silva", "Novak", "Meyer"};

template <typename Container>
const auto& pick(Rng& rng, const Container& c) {
  return c[static_cast<std::size_t>(rng.below(c.size()))];
}

std::string make_id(const char* prefix, std::size_t n) {
  char buf[32];
  std::snprintf(buf, sizeof buf, "%s-%07zu", prefix, n);
  return buf;
}

std::string capitalize(std::string s) {
  if (!s.empty() && s[0] >= 'a' && s[0] <= 'z') s[0] = static_cast<char>(s[0] - 'a' + 'A');
  return s;
}

/// Distinct topic indices, `count` of them, the first one drawn with a
/// mild skew so some topics dominate like real collections do.
std::vector<std::size_t> draw_topics(Rng& rng, std::size_t num_topics, std::size_t count) {
  std::vector<std::size_t> out;
  const auto first = static_cast<std::size_t>(
      std::min<double>(num_topics - 1, rng.uniform() * rng.uniform() * 1.6 * num_topics));
  out.push_back(first);
  while (out.size() < count) {
    auto t = static_cast<std::size_t>(rng.below(num_topics));
    if (std::find(out.begin(), out.end(), t) == out.end()) out.push_back(t);
  }
  return out;
}

std::string compose_text(Rng& rng, const std::vector<TopicVocabulary>& vocab,
                         const std::vector<std::size_t>& topics, std::size_t words,
                         double topical_share) {
  std::string text;
  for (std::size_t i = 0; i < words; ++i) {
    const char* word;
    if (rng.uniform() < topical_share) {
      // The primary topic gets the larger share of topical words.
      const auto t = rng.uniform() < 0.65 ? topics.front() : pick(rng, topics);
      word = pick(rng, vocab[t].terms);
    } else {
      word = pick(rng, kGenericTerms);
    }
    if (!text.empty()) text += ' ';
    text += word;
  }
  return text;
}

std::string authors(Rng& rng) {
  std::string out;
  const auto n = 1 + rng.below(3);
  for (std::uint64_t i = 0; i < n; ++i) {
    if (i) out += "; ";
    out += pick(rng, kSurnames);
  }
  return out;
}

std::vector<std::pair<std::string, std::string>> life_science_queries(Rng& rng,
                                                                      std::size_t count) {
  const auto& vocab = life_science_topics();
  std::vector<std::pair<std::string, std::string>> out;
  std::set<std::string> seen;
  std::size_t attempts = 0;
  while (out.size() < count && attempts++ < count * 100) {
    const auto& topic = pick(rng, vocab);
    const auto len = 1 + rng.below(rng.uniform() < 0.3 ? 1 : 2);
    std::vector<std::string> terms;
    while (terms.size() < len) {
      std::string term = pick(rng, topic.terms);
      if (std::find(terms.begin(), terms.end(), term) == terms.end()) terms.push_back(term);
    }
    std::string text;
    for (const auto& t : terms) text += (text.empty() ? "" : " ") + t;
    if (!seen.insert(text).second) continue;
    out.emplace_back(make_id("q", out.size() + 1), text);
  }
  return out;
}

}  // namespace

std::string_view to_string(SiteProfile profile) {
  return profile == SiteProfile::life_science ? "life_science" : "social_science";
}

SiteProfile parse_site_profile(std::string_view text) {
  if (text == "life_science") return SiteProfile::life_science;
  if (text == "social_science") return SiteProfile::social_science;
  throw ValidationError("unknown site profile '" + std::string(text) +
                        "' (expected life_science or social_science)");
}

Task task_for(SiteProfile profile) {
  return profile == SiteProfile::life_science ? Task::adhoc_retrieval
                                              : Task::dataset_recommendation;
}

DeskSite generate_life_science(std::size_t num_records, std::uint64_t seed,
                               std::size_t num_queries) {
  if (num_records < 1) throw ValidationError("life_science needs at least one record");
  const auto& vocab = life_science_topics();
  Rng rng(derive_seed(seed, "life_science/records"));
  DeskSite site;
  site.records.reserve(num_records);
  for (std::size_t i = 0; i < num_records; ++i) {
    Record r;
    r.id = make_id("ls", i + 1);
    r.kind = RecordKind::publication;
    const auto topics = draw_topics(rng, vocab.size(), 1 + rng.below(2));
    r.title = capitalize(compose_text(rng, vocab, topics, 4 + rng.below(5), 0.6));
    r.abstract = capitalize(compose_text(rng, vocab, topics, 30 + rng.below(31), 0.35));
    for (auto t : topics) r.topics.insert(vocab[t].topic);
    r.language = rng.uniform() < 0.8 ? "en" : pick(rng, kLifeLanguages);
    r.year = 1960 + static_cast<int>(rng.below(61));
    r.extra["authors"] = authors(rng);
    r.extra["source"] = rng.uniform() < 0.7 ? "MEDLINE" : (rng.coin() ? "AGRIS" : "AGRICOLA");
    site.records.push_back(std::move(r));
  }
  Rng qrng(derive_seed(seed, "life_science/queries"));
  site.queries = HeadQuerySet(life_science_queries(qrng, num_queries));
  return site;
}

DeskSite generate_social_science(std::size_t scale, std::uint64_t seed, std::size_t num_seeds) {
  if (scale < 1) throw ValidationError("scale must be >= 1");
  const std::size_t publications = 95000 / scale;
  const std::size_t datasets = 84000 / scale;
  if (publications == 0 || datasets == 0) throw ValidationError("scale too large for social_science");
  const auto& vocab = social_science_topics();
  Rng rng(derive_seed(seed, "social_science/records"));
  DeskSite site;
  site.records.reserve(publications + datasets);
  for (std::size_t i = 0; i < publications; ++i) {
    Record r;
    r.id = make_id("pub", i + 1);
    r.kind = RecordKind::publication;
    const auto topics = draw_topics(rng, vocab.size(), 1 + rng.below(3));
    r.title = capitalize(compose_text(rng, vocab, topics, 5 + rng.below(5), 0.6));
    r.abstract = capitalize(compose_text(rng, vocab, topics, 30 + rng.below(31), 0.4));
    for (auto t : topics) r.topics.insert(vocab[t].topic);
    r.language = rng.uniform() < 0.6 ? "en" : "de";
    r.year = 1970 + static_cast<int>(rng.below(51));
    r.extra["authors"] = authors(rng);
    site.records.push_back(std::move(r));
  }
  for (std::size_t i = 0; i < datasets; ++i) {
    Record r;
    r.id = make_id("rd", i + 1);
    r.kind = RecordKind::research_data;
    const auto topics = draw_topics(rng, vocab.size(), 1 + rng.below(4));
    r.title = capitalize(compose_text(rng, vocab, topics, 4 + rng.below(5), 0.6));
    r.abstract = capitalize(compose_text(rng, vocab, topics, 25 + rng.below(26), 0.4));
    for (auto t : topics) r.topics.insert(vocab[t].topic);
    r.language = rng.uniform() < 0.5 ? "en" : "de";
    r.year = 1970 + static_cast<int>(rng.below(51));
    r.extra["collection_method"] = pick(rng, kCollectionMethods);
    r.extra["datatype"] = pick(rng, kDataTypes);
    r.extra["primary_investigators"] = authors(rng);
    site.records.push_back(std::move(r));
  }

  // Seed publications: a seeded sample without replacement.
  std::vector<std::size_t> order(publications);
  for (std::size_t i = 0; i < publications; ++i) order[i] = i;
  Rng qrng(derive_seed(seed, "social_science/seeds"));
  for (std::size_t i = publications; i > 1; --i) {
    std::swap(order[i - 1], order[static_cast<std::size_t>(qrng.below(i))]);
  }
  std::vector<std::pair<std::string, std::string>> seeds;
  for (std::size_t i = 0; i < std::min(num_seeds, publications); ++i) {
    const Record& r = site.records[order[i]];
    seeds.emplace_back(r.id, r.title);
  }
  site.queries = HeadQuerySet(std::move(seeds));
  return site;
}

DeskSite generate_site(SiteProfile profile, std::size_t scale, std::uint64_t seed) {
  if (scale < 1) throw ValidationError("scale must be >= 1");
  return profile == SiteProfile::life_science ? generate_life_science(scale, seed)
                                              : generate_social_science(scale, seed);
}

DeskSiteFiles write_desk_site(const std::filesystem::path& dir, const DeskSite& site,
                              const Qrels& qrels) {
  std::filesystem::create_directories(dir);
  DeskSiteFiles files{dir / "corpus.jsonl", dir / "queries.tsv", dir / "qrels.tsv"};
  write_records(files.corpus, site.records);
  write_head_queries(files.queries, site.queries);
  export_qrels(files.qrels, qrels);
  return files;
}

}  // namespace livinglab
