# GMFlowRec Test Package
