//! The trained model as a decomposition backend.

use tabqa_core::decompose::{DecomposeError, Decomposer};
use tabqa_core::question::{FormulatedQuestion, QuestionClass};
use tabqa_core::similarity::SimilarityProvider;
use tabqa_core::table::DataTable;

use crate::model::{DecodeOptions, Model};
use crate::vocab::{SourceMap, Vocab};
use crate::Real;

pub struct NeuralDecomposer {
    model: Model<Real>,
    vocab: Vocab,
}

impl NeuralDecomposer {
    pub fn new(model: Model<Real>, vocab: Vocab) -> NeuralDecomposer {
        NeuralDecomposer { model, vocab }
    }

    pub fn from_checkpoint(json: &str) -> Result<NeuralDecomposer, crate::model::ModelError> {
        let (model, vocab) = crate::checkpoint::from_json(json)?;
        Ok(NeuralDecomposer { model, vocab })
    }

    pub fn model(&self) -> &Model<Real> {
        &self.model
    }

    pub fn vocab(&self) -> &Vocab {
        &self.vocab
    }

    /// Both sub-questions as token lists.
    pub fn decode_tokens(&self, input: &[String], class: QuestionClass, opts: DecodeOptions) -> Result<(Vec<String>, Vec<String>), crate::model::ModelError> {
        let src = SourceMap::new(input, &self.vocab);
        let (a, b) = self.model.decompose_ids(&src, class, opts)?;
        let words = |ids: Vec<usize>| ids.into_iter().map(|i| src.word(i, &self.vocab).to_string()).collect();
        Ok((words(a), words(b)))
    }
}

impl Decomposer for NeuralDecomposer {
    fn name(&self) -> &str {
        "neural"
    }

    fn decompose(
        &self,
        fq: &FormulatedQuestion,
        class: QuestionClass,
        _x: &DataTable,
        _provider: &dyn SimilarityProvider,
    ) -> Result<(String, String), DecomposeError> {
        let (a, b) = self
            .decode_tokens(&fq.input_tokens(), class, DecodeOptions::default())
            .map_err(|e| DecomposeError::Backend(e.to_string()))?;
        if a.is_empty() || b.is_empty() {
            return Err(DecomposeError::Backend("empty sub-question".into()));
        }
        Ok((a.join(" "), b.join(" ")))
    }
}
