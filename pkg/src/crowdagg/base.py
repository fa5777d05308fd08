"""Estimator base class following the scikit-learn parameter contract.

Constructors hold hyperparameters only; ``fit`` consumes a table and fills
trailing-underscore attributes; ``fit_predict`` returns the packaged result.
``get_params``/``set_params`` make the estimators work with ecosystem
tooling such as ``sklearn.base.clone`` without importing scikit-learn here.
"""

import inspect


class BaseAggregator:
    @classmethod
    def _param_names(cls):
        sig = inspect.signature(cls.__init__)
        return [
            name
            for name, p in sig.parameters.items()
            if name != "self" and p.kind not in (p.VAR_POSITIONAL, p.VAR_KEYWORD)
        ]

    def get_params(self, deep=True):
        return {name: getattr(self, name) for name in self._param_names()}

    def set_params(self, **params):
        valid = set(self._param_names())
        for name, value in params.items():
            if name not in valid:
                raise ValueError(
                    f"invalid parameter {name!r} for {type(self).__name__}; "
                    f"valid parameters: {sorted(valid)}"
                )
            setattr(self, name, value)
        return self

    def fit(self, data):
        raise NotImplementedError

    def fit_predict(self, data):
        self.fit(data)
        return self.result_

    def __repr__(self):
        args = ", ".join(f"{k}={v!r}" for k, v in self.get_params().items())
        return f"{type(self).__name__}({args})"
