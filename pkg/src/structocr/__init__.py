"""Structure-aware OCR toolkit for critical editions.

Subpackages and modules:

* :mod:`structocr.markup`: the line-based annotation scheme
* :mod:`structocr.metrics`: CER/WER, structure F1s, diacritic taxonomy
* :mod:`structocr.tei`: TEI ingestion and citation structures
* :mod:`structocr.render`: layouts, typesetting sources, span logs, masking
* :mod:`structocr.align`: page segmentation and the retention gate
* :mod:`structocr.corpus`: manifests, statistics, reconstruction
"""

__version__ = "0.1.0"
