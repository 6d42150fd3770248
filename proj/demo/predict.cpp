// Trains both models on a text file and shows how the prediction list for
// one context changes across combination methods.
//
//   demo_predict data/desk/train.txt "the congress must act on" [prefix]

#include <iostream>
#include <memory>

#include "wordpred/wordpred.hpp"

using namespace wordpred;

int main(int argc, char** argv) {
  if (argc < 3) {
    std::cerr << "usage: demo_predict corpus.txt \"context words\" [prefix]\n";
    return 2;
  }
  const std::string prefix = argc > 3 ? argv[3] : "";
  const auto tokens = tokenize(read_file(argv[1]));

  NGramTrainOptions ng;
  ng.order = 3;
  auto lm = std::make_shared<const NGramModel>(train_ngram(tokens, ng));

  LsaTrainOptions lsa;
  lsa.dims = 50;
  lsa.window = 20;
  lsa.columns = 500;
  lsa.vocab_size = 10000;
  const WordSet stop = load_stopwords(WORDPRED_STOPWORDS);
  auto space = std::make_shared<const SemanticSpace>(train_space(tokens, stop, lsa));

  for (const auto& name : CombinerConfig::preset_names()) {
    const Pipeline pipeline(lm, space, CombinerConfig::preset(name));
    auto state = pipeline.new_state();
    for (const auto& t : tokenize(argv[2])) pipeline.commit(state, t);
    std::cout << name << ":";
    for (const auto& p : pipeline.predict(state, prefix, 5)) std::cout << "  " << p.word << " " << p.probability;
    std::cout << '\n';
  }
}
