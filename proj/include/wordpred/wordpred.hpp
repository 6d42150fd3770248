#pragma once

#include "wordpred/arpa.hpp"
#include "wordpred/cache.hpp"
#include "wordpred/combiners.hpp"
#include "wordpred/config.hpp"
#include "wordpred/corpus.hpp"
#include "wordpred/error.hpp"
#include "wordpred/evaluation.hpp"
#include "wordpred/lsa_predictor.hpp"
#include "wordpred/ngram.hpp"
#include "wordpred/pipeline.hpp"
#include "wordpred/semantic_space.hpp"
#include "wordpred/service.hpp"
#include "wordpred/typing_session.hpp"
#include "wordpred/utf8.hpp"
