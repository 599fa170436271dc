#ifndef ADPREDICT_ADPREDICT_HPP
#define ADPREDICT_ADPREDICT_HPP

#include "adpredict/adaboost.hpp"
#include "adpredict/cohort.hpp"
#include "adpredict/corpus.hpp"
#include "adpredict/corpus_io.hpp"
#include "adpredict/date.hpp"
#include "adpredict/error.hpp"
#include "adpredict/experiment.hpp"
#include "adpredict/explain.hpp"
#include "adpredict/features.hpp"
#include "adpredict/forest.hpp"
#include "adpredict/kv_config.hpp"
#include "adpredict/lexicon.hpp"
#include "adpredict/linear_model.hpp"
#include "adpredict/matcher.hpp"
#include "adpredict/matrix.hpp"
#include "adpredict/metrics.hpp"
#include "adpredict/model_io.hpp"
#include "adpredict/parallel.hpp"
#include "adpredict/pipeline.hpp"
#include "adpredict/random.hpp"
#include "adpredict/records.hpp"
#include "adpredict/trends.hpp"

#endif  // ADPREDICT_ADPREDICT_HPP
